#pragma once

// JSON analysis report and the plain-text utilization tables printed by the CLI.

#include <cstddef>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "donald/pipeline.hpp"

namespace donald {

inline constexpr double kDefaultUtilizationThreshold = 0.25;

struct AnalysisReport {
  std::string model_name;
  std::vector<std::string> tokens;
  std::size_t layers = 0;
  std::size_t token_count = 0;
  AnalysisParams parameters;
  Field matrix;
  Field anisotropy;
  Field principal_directions;
  UtilizationReport utilization;
  std::vector<std::size_t> underutilized_layers;
};

inline AnalysisReport build_report(const EmbeddingSpace& space, const Analysis& analysis, const AnalysisParams& params,
                                   double utilization_threshold) {
  AnalysisReport r;
  r.model_name = space.model_name();
  r.tokens = space.tokens();
  r.layers = analysis.matrix.layers();
  r.token_count = analysis.matrix.tokens();
  r.parameters = params;
  r.matrix = analysis.matrix.m;
  r.anisotropy = analysis.flow.anisotropy;
  r.principal_directions = Field(r.layers, r.token_count);
  for (std::size_t i = 0; i < r.layers; ++i)
    for (std::size_t j = 0; j < r.token_count; ++j)
      r.principal_directions(i, j) = principal_angle(analysis.flow.direction(i, j));
  r.utilization = analysis.utilization;
  for (const auto& l : r.utilization.per_layer)
    if (l.utilization < utilization_threshold) r.underutilized_layers.push_back(l.layer);
  return r;
}

namespace detail {

inline nlohmann::ordered_json field_to_json(const Field& f) {
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < f.rows(); ++i) {
    const auto r = f.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const AnalysisReport& r) {
  nlohmann::ordered_json j;
  j["model_name"] = r.model_name;
  j["tokens"] = r.tokens;
  j["L"] = r.layers;
  j["T"] = r.token_count;
  j["parameters"] = {
      {"normalization", std::string(to_string(r.parameters.normalization))},
      {"sigma_grad", r.parameters.sigma_grad_x},
      {"sigma_tensor", r.parameters.sigma_tensor},
  };
  if (r.parameters.sigma_grad_y != r.parameters.sigma_grad_x) {
    j["parameters"]["sigma_grad"] = {r.parameters.sigma_grad_x, r.parameters.sigma_grad_y};
  }
  j["matrix"] = detail::field_to_json(r.matrix);
  j["anisotropy"] = detail::field_to_json(r.anisotropy);
  j["principal_directions"] = detail::field_to_json(r.principal_directions);
  auto per_layer = nlohmann::ordered_json::array();
  for (const auto& l : r.utilization.per_layer)
    per_layer.push_back({{"layer_index", l.layer}, {"utilization", l.utilization}});
  j["utilization"] = {{"per_layer", per_layer}, {"mean", r.utilization.mean}, {"std_dev", r.utilization.std_dev}};
  j["underutilized_layers"] = r.underutilized_layers;
  return j;
}

inline std::string serialize_report(const AnalysisReport& r) { return to_json(r).dump(2) + "\n"; }

/// Layers descending, percentages with two decimals, then Mean and SD rows.
inline std::string format_utilization_table(const UtilizationReport& u, std::string_view column = "U (%)") {
  std::string out = fmt::format("{:>6}  {:>8}\n", "Layer", column);
  for (auto it = u.per_layer.rbegin(); it != u.per_layer.rend(); ++it)
    out += fmt::format("{:>6}  {:>8.2f}\n", it->layer, 100.0 * it->utilization);
  out += fmt::format("{:>6}  {:>8.2f}\n", "Mean", 100.0 * u.mean);
  out += fmt::format("{:>6}  {:>8.2f}\n", "SD", 100.0 * u.std_dev);
  return out;
}

/// Per-layer U_a - U_b in percentage points, layers descending. Layers present
/// in only one input are reported as missing.
inline std::string format_utilization_deltas(const UtilizationReport& a, const UtilizationReport& b) {
  const std::size_t n = std::max(a.per_layer.size(), b.per_layer.size());
  std::string out = fmt::format("{:>6}  {:>8}  {:>8}  {:>8}\n", "Layer", "U_a (%)", "U_b (%)", "delta");
  for (std::size_t k = n; k-- > 0;) {
    if (k < a.per_layer.size() && k < b.per_layer.size()) {
      const double ua = a.per_layer[k].utilization, ub = b.per_layer[k].utilization;
      out += fmt::format("{:>6}  {:>8.2f}  {:>8.2f}  {:>+8.2f}\n", k + 1, 100.0 * ua, 100.0 * ub, 100.0 * (ua - ub));
    } else {
      out += fmt::format("{:>6}  {:>8}  {:>8}  {:>8}\n", k + 1, k < a.per_layer.size() ? fmt::format("{:.2f}", 100.0 * a.per_layer[k].utilization) : "-",
                         k < b.per_layer.size() ? fmt::format("{:.2f}", 100.0 * b.per_layer[k].utilization) : "-", "-");
    }
  }
  out += fmt::format("{:>6}  {:>8.2f}  {:>8.2f}  {:>+8.2f}\n", "Mean", 100.0 * a.mean, 100.0 * b.mean,
                     100.0 * (a.mean - b.mean));
  return out;
}

}  // namespace donald
