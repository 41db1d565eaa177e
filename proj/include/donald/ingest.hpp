#pragma once

// Loading dumped hidden states into a canonical (layer, token, hidden) cube.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "donald/error.hpp"
#include "donald/npy.hpp"

namespace donald {

enum class Layout { LTH, TLH };
enum class LayoutHint { Auto, LTH, TLH };

inline constexpr std::size_t kMaxHeuristicLayers = 128;

inline std::string_view to_string(Layout layout) { return layout == Layout::LTH ? "LTH" : "TLH"; }

inline std::optional<Layout> parse_layout(std::string_view s) {
  if (s == "LTH") return Layout::LTH;
  if (s == "TLH") return Layout::TLH;
  return std::nullopt;
}

/// Decides which of the two leading axes holds layers. The trailing axis is
/// always hidden units and must be the largest. A declared layout wins;
/// otherwise the smaller leading axis is taken as layers when it is at most
/// kMaxHeuristicLayers and differs from the other. nullopt means ambiguous.
inline std::optional<Layout> detect_layout(const std::array<std::size_t, 3>& shape,
                                           std::optional<Layout> declared = std::nullopt) {
  if (declared) return declared;
  const auto [a, b, h] = shape;
  if (h < a || h < b) return std::nullopt;
  if (a == b) return std::nullopt;
  if (std::min(a, b) > kMaxHeuristicLayers) return std::nullopt;
  return a < b ? Layout::LTH : Layout::TLH;
}

/// Sidecar `<name>.meta.json` contents. Every field is optional on disk.
struct Metadata {
  std::optional<std::vector<std::string>> tokens;
  std::string model_name;
  std::optional<Layout> layout;
  bool includes_embedding_output = false;
};

inline std::filesystem::path metadata_path(const std::filesystem::path& npy_path) {
  auto p = npy_path;
  p.replace_extension(".meta.json");
  return p;
}

inline Metadata parse_metadata(std::string_view text) {
  Metadata meta;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw Error(ErrorCode::MalformedFile, "metadata must be a JSON object");
    if (auto it = j.find("tokens"); it != j.end())
      meta.tokens = it->get<std::vector<std::string>>();
    if (auto it = j.find("model_name"); it != j.end()) meta.model_name = it->get<std::string>();
    if (auto it = j.find("layout"); it != j.end()) {
      const auto s = it->get<std::string>();
      meta.layout = parse_layout(s);
      if (!meta.layout) throw Error(ErrorCode::MalformedFile, "metadata layout '" + s + "' is not LTH or TLH");
    }
    if (auto it = j.find("includes_embedding_output"); it != j.end())
      meta.includes_embedding_output = it->get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedFile, std::string("metadata: ") + e.what());
  }
  return meta;
}

/// Hidden states in canonical (layer, token, hidden-unit) order. Immutable
/// after construction; the factory enforces shape, token count and finiteness.
class EmbeddingSpace {
 public:
  static EmbeddingSpace create(std::size_t layers, std::size_t tokens, std::size_t hidden,
                               std::vector<double> values, std::vector<std::string> token_labels = {},
                               std::string model_name = {}, bool included_embedding_output = false) {
    if (layers == 0 || tokens == 0 || hidden == 0)
      throw Error(ErrorCode::MalformedFile, "every axis must be non-empty");
    if (values.size() != layers * tokens * hidden)
      throw Error(ErrorCode::MalformedFile, "value count does not match L*T*H");
    if (tokens < 2)
      throw Error(ErrorCode::TooFewTokens, "need at least 2 tokens, got " + std::to_string(tokens));
    if (!std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); }))
      throw Error(ErrorCode::MalformedFile, "array contains NaN or Inf");
    if (token_labels.empty()) {
      token_labels.reserve(tokens);
      for (std::size_t t = 0; t < tokens; ++t) token_labels.push_back("t" + std::to_string(t));
    }
    if (token_labels.size() != tokens)
      throw Error(ErrorCode::MalformedFile, "metadata lists " + std::to_string(token_labels.size()) +
                                                " tokens but the array has " + std::to_string(tokens));
    EmbeddingSpace s;
    s.layers_ = layers;
    s.tokens_ = tokens;
    s.hidden_ = hidden;
    s.values_ = std::move(values);
    s.token_labels_ = std::move(token_labels);
    s.model_name_ = std::move(model_name);
    s.included_embedding_output_ = included_embedding_output;
    return s;
  }

  std::size_t num_layers() const noexcept { return layers_; }
  std::size_t num_tokens() const noexcept { return tokens_; }
  std::size_t num_hidden() const noexcept { return hidden_; }

  double at(std::size_t layer, std::size_t token, std::size_t unit) const {
    return values_[(layer * tokens_ + token) * hidden_ + unit];
  }
  std::span<const double> hidden(std::size_t layer, std::size_t token) const {
    return {values_.data() + (layer * tokens_ + token) * hidden_, hidden_};
  }
  std::span<const double> values() const noexcept { return values_; }

  const std::vector<std::string>& tokens() const noexcept { return token_labels_; }
  const std::string& model_name() const noexcept { return model_name_; }
  bool included_embedding_output() const noexcept { return included_embedding_output_; }

 private:
  EmbeddingSpace() = default;

  std::size_t layers_ = 0;
  std::size_t tokens_ = 0;
  std::size_t hidden_ = 0;
  std::vector<double> values_;
  std::vector<std::string> token_labels_;
  std::string model_name_;
  bool included_embedding_output_ = false;
};

inline EmbeddingSpace load_embedding_space(const std::filesystem::path& path,
                                           LayoutHint hint = LayoutHint::Auto) {
  if (!std::filesystem::exists(path))
    throw Error(ErrorCode::NotFound, "input '" + path.string() + "' does not exist");
  npy::Array arr = npy::load(path);
  if (arr.shape.size() != 3)
    throw Error(ErrorCode::MalformedFile,
                "expected a 3-D array, got " + std::to_string(arr.shape.size()) + " dimensions");

  Metadata meta;
  if (const auto mp = metadata_path(path); std::filesystem::exists(mp)) {
    std::ifstream in(mp);
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    meta = parse_metadata(text);
  }

  const std::array<std::size_t, 3> shape{arr.shape[0], arr.shape[1], arr.shape[2]};
  std::optional<Layout> layout;
  switch (hint) {
    case LayoutHint::LTH: layout = Layout::LTH; break;
    case LayoutHint::TLH: layout = Layout::TLH; break;
    case LayoutHint::Auto: layout = detect_layout(shape, meta.layout); break;
  }
  if (!layout)
    throw Error(ErrorCode::AmbiguousLayout,
                "cannot tell layers from tokens in shape (" + std::to_string(shape[0]) + ", " +
                    std::to_string(shape[1]) + ", " + std::to_string(shape[2]) +
                    "); declare the layout in metadata or pass a layout hint");

  const std::size_t hidden = shape[2];
  std::size_t layers = *layout == Layout::LTH ? shape[0] : shape[1];
  const std::size_t tokens = *layout == Layout::LTH ? shape[1] : shape[0];

  std::vector<double> values;
  if (*layout == Layout::LTH) {
    values = std::move(arr.data);
  } else {
    values.resize(arr.data.size());
    for (std::size_t t = 0; t < tokens; ++t)
      for (std::size_t l = 0; l < layers; ++l)
        std::copy_n(arr.data.begin() + static_cast<std::ptrdiff_t>((t * layers + l) * hidden), hidden,
                    values.begin() + static_cast<std::ptrdiff_t>((l * tokens + t) * hidden));
  }

  if (meta.includes_embedding_output) {
    if (layers < 2)
      throw Error(ErrorCode::MalformedFile, "array holds only the embedding output, no transformer layers");
    values.erase(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(tokens * hidden));
    --layers;
  }

  return EmbeddingSpace::create(layers, tokens, hidden, std::move(values),
                                meta.tokens.value_or(std::vector<std::string>{}), meta.model_name,
                                meta.includes_embedding_output);
}

/// Writes `<basename>.npy` in LTH order plus its sidecar. The embedding
/// output, if it was ever present, is already gone, so the sidecar says so.
inline void save_embedding_space(const std::filesystem::path& npy_path, const EmbeddingSpace& space,
                                 npy::Dtype dtype = npy::Dtype::Float64) {
  const std::array<std::size_t, 3> shape{space.num_layers(), space.num_tokens(), space.num_hidden()};
  npy::save(npy_path, shape, space.values(), dtype);
  nlohmann::ordered_json meta;
  meta["tokens"] = space.tokens();
  meta["model_name"] = space.model_name();
  meta["layout"] = "LTH";
  meta["includes_embedding_output"] = false;
  std::ofstream out(metadata_path(npy_path));
  if (!out) throw Error(ErrorCode::UnwritableOutput, "cannot write metadata for '" + npy_path.string() + "'");
  out << meta.dump(2) << '\n';
}

}  // namespace donald
