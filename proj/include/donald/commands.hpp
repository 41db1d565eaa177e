#pragma once

// The three CLI commands as library calls. Each writes its artifact and
// returns what it printed to stdout; errors surface as donald::Error.

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>

#include "donald/error.hpp"
#include "donald/ingest.hpp"
#include "donald/pipeline.hpp"
#include "donald/report.hpp"
#include "donald/visualize.hpp"

namespace donald {

/// Process exit codes.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2 };

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidPlotSpec:
    case ErrorCode::InvalidArgument:
      return kExitUsage;
    default:
      return kExitData;
  }
}

struct AnalyzeOptions {
  std::filesystem::path input;
  LayoutHint layout = LayoutHint::Auto;
  AnalysisParams params;
  double utilization_threshold = kDefaultUtilizationThreshold;
  std::filesystem::path out;
};

struct VisualizeOptions {
  std::filesystem::path input;
  LayoutHint layout = LayoutHint::Auto;
  AnalysisParams params;
  PlotSpec plot;
  std::filesystem::path out;
};

struct CompareOptions {
  std::filesystem::path input_a;
  std::filesystem::path input_b;
  LayoutHint layout = LayoutHint::Auto;
  AnalysisParams params;
  PlotSpec plot;
  std::set<std::size_t> highlight_a;
  std::set<std::size_t> highlight_b;
  std::filesystem::path out;
};

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::UnwritableOutput, "cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::UnwritableOutput, "write to '" + path.string() + "' failed");
}

inline void check_params(const AnalysisParams& p) {
  for (double s : {p.sigma_grad_x, p.sigma_grad_y, p.sigma_tensor})
    if (!(s >= 0.0) || !std::isfinite(s))
      throw Error(ErrorCode::InvalidArgument, "smoothing scales must be finite and non-negative");
}

}  // namespace detail

inline std::string cmd_analyze(const AnalyzeOptions& opt) {
  detail::check_params(opt.params);
  if (!(opt.utilization_threshold >= 0.0 && opt.utilization_threshold <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "utilization threshold must lie in [0, 1]");
  const auto space = load_embedding_space(opt.input, opt.layout);
  const auto analysis = analyze(space, opt.params);
  const auto report = build_report(space, analysis, opt.params, opt.utilization_threshold);
  detail::write_text(opt.out, serialize_report(report));

  std::string printed = format_utilization_table(report.utilization);
  if (!report.underutilized_layers.empty()) {
    printed += fmt::format("Under-utilised (< {:.2f}%):", 100.0 * opt.utilization_threshold);
    for (auto l : report.underutilized_layers) printed += fmt::format(" {}", l);
    printed += "\n";
  }
  return printed;
}

inline std::string cmd_visualize(const VisualizeOptions& opt) {
  opt.plot.validate();
  detail::check_params(opt.params);
  const auto space = load_embedding_space(opt.input, opt.layout);
  const auto analysis = analyze(space, opt.params);
  detail::write_text(opt.out, render_svg(analysis.flow, space.tokens(), opt.plot));
  return fmt::format("wrote {} ({} layers x {} tokens)\n", opt.out.string(), space.num_layers(), space.num_tokens());
}

inline std::string cmd_compare(const CompareOptions& opt) {
  opt.plot.validate();
  detail::check_params(opt.params);
  const auto a = load_embedding_space(opt.input_a, opt.layout);
  const auto b = load_embedding_space(opt.input_b, opt.layout);
  const auto fa = analyze(a, opt.params);
  const auto fb = analyze(b, opt.params);
  detail::write_text(opt.out, render_comparison(fa.flow, fb.flow, a.tokens(), b.tokens(), opt.plot, opt.highlight_a,
                                                opt.highlight_b));
  return format_utilization_deltas(fa.utilization, fb.utilization);
}

}  // namespace donald
