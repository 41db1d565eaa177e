#pragma once

// SVG rendering of flow fields: direction-coloured tiles whose opacity is the
// anisotropy, overlaid with diffusion ellipses. Output is byte-deterministic;
// every coordinate is printed with three decimals.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "donald/error.hpp"
#include "donald/spectral.hpp"

namespace donald {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kTokenAxisRed{214, 39, 40};
inline constexpr Rgb kDiagonalYellow{255, 221, 51};
inline constexpr Rgb kLayerAxisBlue{31, 119, 180};

inline constexpr int kMinCellSizePx = 8;
inline constexpr double kMinSemiAxisPx = 0.5;

struct PlotSpec {
  int cell_size_px = 40;
  double ellipse_fill_fraction = 0.9;
  bool show_ellipses = true;
  bool show_token_labels = true;
  bool show_layer_labels = true;
  std::set<std::size_t> highlight_columns;

  void validate() const {
    if (cell_size_px < kMinCellSizePx)
      throw Error(ErrorCode::InvalidPlotSpec, fmt::format("cell size {} px is below the minimum of {} px",
                                                          cell_size_px, kMinCellSizePx));
    if (!(ellipse_fill_fraction > 0.0 && ellipse_fill_fraction <= 1.0))
      throw Error(ErrorCode::InvalidPlotSpec, "ellipse fill fraction must lie in (0, 1]");
  }
};

/// pi-periodic colour: s = cos(2 theta) blends yellow (s = 0) toward red
/// (s = 1, token axis) or blue (s = -1, layer axis). Channels are rounded.
inline Rgb direction_color(double theta) {
  const double s = std::cos(2.0 * theta);
  const Rgb& end = s >= 0.0 ? kTokenAxisRed : kLayerAxisBlue;
  const double t = std::abs(s);
  auto mix = [t](std::uint8_t from, std::uint8_t to) {
    return static_cast<std::uint8_t>(std::lround(static_cast<double>(from) + t * (static_cast<double>(to) - from)));
  };
  return {mix(kDiagonalYellow.r, end.r), mix(kDiagonalYellow.g, end.g), mix(kDiagonalYellow.b, end.b)};
}

inline double tile_alpha(double anisotropy) { return std::clamp(anisotropy, 0.0, 1.0); }

struct EllipseGeometry {
  double semi_major = 0.0;
  double semi_minor = 0.0;
  double rotation = 0.0;  // radians, counter-clockwise from the token axis
};

inline EllipseGeometry ellipse_geometry(double lambda1, double lambda2, const Vec2& v1, double k) {
  return {k * std::sqrt(std::max(lambda1, 0.0)), k * std::sqrt(std::max(lambda2, 0.0)), std::atan2(v1.y, v1.x)};
}

inline double global_scale(std::span<const FlowField* const> fields, const PlotSpec& spec) {
  double peak = 0.0;
  for (const FlowField* f : fields)
    for (double l : f->lambda1.values()) peak = std::max(peak, std::sqrt(std::max(l, 0.0)));
  if (peak == 0.0) return 1.0;
  return spec.ellipse_fill_fraction * (spec.cell_size_px / 2.0) / peak;
}

inline double global_scale(const FlowField& field, const PlotSpec& spec) {
  const FlowField* one[] = {&field};
  return global_scale(one, spec);
}

namespace svg {

/// Fixed three-decimal number; never prints "-0.000".
inline std::string num(double v) {
  std::string s = fmt::format("{:.3f}", v);
  if (s == "-0.000") s = "0.000";
  return s;
}

inline std::string escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string rgb(const Rgb& c) { return fmt::format("rgb({},{},{})", c.r, c.g, c.b); }

inline constexpr double kMargin = 16.0;
inline constexpr double kLayerLabelWidth = 40.0;
inline constexpr double kTokenLabelHeight = 96.0;
inline constexpr double kLegendHeight = 36.0;
inline constexpr double kPanelGap = 24.0;
inline constexpr double kMinWidth = 540.0;

struct Panel {
  const FlowField* field;
  std::span<const std::string> tokens;
  std::set<std::size_t> highlight;
  std::string caption;
};

inline double panel_height(const Panel& p, const PlotSpec& spec) {
  return static_cast<double>(p.field->layers()) * spec.cell_size_px + (spec.show_token_labels ? kTokenLabelHeight : 0.0);
}

inline double panel_width(const Panel& p, const PlotSpec& spec) {
  return kLayerLabelWidth + static_cast<double>(p.field->tokens()) * spec.cell_size_px;
}

inline void check_panel(const Panel& p) {
  if (p.tokens.size() != p.field->tokens())
    throw Error(ErrorCode::InconsistentLabels, fmt::format("{} token labels for a field with {} tokens",
                                                           p.tokens.size(), p.field->tokens()));
  for (std::size_t col : p.highlight)
    if (col >= p.field->tokens())
      throw Error(ErrorCode::OutOfBounds, fmt::format("highlight index {} is out of range for {} tokens", col,
                                                      p.field->tokens()));
}

inline void write_legend(std::string& out, double x, double y) {
  struct Entry {
    Rgb color;
    const char* label;
  };
  const Entry entries[] = {{kTokenAxisRed, "token-to-token"},
                           {kDiagonalYellow, "diagonal"},
                           {kLayerAxisBlue, "layer-to-layer"}};
  double cx = x;
  for (const auto& e : entries) {
    out += fmt::format("<rect class=\"legend-swatch\" x=\"{}\" y=\"{}\" width=\"14.000\" height=\"14.000\" fill=\"{}\"/>\n",
                       num(cx), num(y), rgb(e.color));
    out += fmt::format("<text class=\"legend\" x=\"{}\" y=\"{}\">{}</text>\n", num(cx + 20.0), num(y + 11.0), e.label);
    cx += 120.0;
  }
  out += fmt::format("<text class=\"legend\" x=\"{}\" y=\"{}\">opacity = anisotropy</text>\n", num(cx), num(y + 11.0));
}

inline void write_panel(std::string& out, const Panel& p, const PlotSpec& spec, double k, double ox, double oy) {
  const FlowField& f = *p.field;
  const double cs = spec.cell_size_px;
  const std::size_t rows = f.layers(), cols = f.tokens();
  const double gx = ox + kLayerLabelWidth;

  out += "<g class=\"panel\">\n";
  if (!p.caption.empty())
    out += fmt::format("<text class=\"caption\" x=\"{}\" y=\"{}\">{}</text>\n", num(ox), num(oy - 6.0), escape(p.caption));

  // Layer 1 sits in the bottom row.
  auto tile_y = [&](std::size_t i) { return oy + static_cast<double>(rows - 1 - i) * cs; };

  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const Rgb c = direction_color(std::atan2(f.v1y(i, j), f.v1x(i, j)));
      out += fmt::format("<rect class=\"tile\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" fill-opacity=\"{}\"/>\n",
                         num(gx + static_cast<double>(j) * cs), num(tile_y(i)), num(cs), num(cs), rgb(c),
                         num(tile_alpha(f.anisotropy(i, j))));
    }
  }

  if (spec.show_ellipses) {
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        const auto g = ellipse_geometry(f.lambda1(i, j), f.lambda2(i, j), f.direction(i, j), k);
        const double rx = std::max(g.semi_major, kMinSemiAxisPx);
        const double ry = std::max(g.semi_minor, kMinSemiAxisPx);
        const double cx = gx + (static_cast<double>(j) + 0.5) * cs;
        const double cy = tile_y(i) + 0.5 * cs;
        if (rx == ry) {
          out += fmt::format("<circle class=\"glyph\" cx=\"{}\" cy=\"{}\" r=\"{}\"/>\n", num(cx), num(cy), num(rx));
        } else {
          // SVG y points down, so the data-frame angle is negated.
          const double deg = -g.rotation * 180.0 / std::numbers::pi;
          out += fmt::format(
              "<ellipse class=\"glyph\" cx=\"{0}\" cy=\"{1}\" rx=\"{2}\" ry=\"{3}\" transform=\"rotate({4} {0} {1})\"/>\n",
              num(cx), num(cy), num(rx), num(ry), num(deg));
        }
      }
    }
  }

  for (std::size_t j : p.highlight) {
    out += fmt::format("<rect class=\"highlight\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#000\" stroke-width=\"2\"/>\n",
                       num(gx + static_cast<double>(j) * cs), num(oy), num(cs), num(static_cast<double>(rows) * cs));
  }

  if (spec.show_layer_labels) {
    for (std::size_t i = 0; i < rows; ++i)
      out += fmt::format("<text class=\"layer\" x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
                         num(gx - 6.0), num(tile_y(i) + 0.5 * cs + 4.0), i + 1);
  }
  if (spec.show_token_labels) {
    const double ty = oy + static_cast<double>(rows) * cs + 10.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double tx = gx + (static_cast<double>(j) + 0.5) * cs;
      out += fmt::format("<text class=\"token\" x=\"{0}\" y=\"{1}\" text-anchor=\"end\" transform=\"rotate(-60 {0} {1})\">{2}</text>\n",
                         num(tx), num(ty), escape(p.tokens[j]));
    }
  }
  out += "</g>\n";
}

inline std::string render(std::span<const Panel> panels, const PlotSpec& spec) {
  spec.validate();
  std::vector<const FlowField*> fields;
  for (const auto& p : panels) {
    check_panel(p);
    fields.push_back(p.field);
  }
  const double k = global_scale(fields, spec);

  double width = kMinWidth;
  double height = kMargin + kLegendHeight;
  for (const auto& p : panels) {
    width = std::max(width, 2.0 * kMargin + panel_width(p, spec));
    height += panel_height(p, spec) + kPanelGap;
  }
  height += kMargin - kPanelGap;

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n",
                     num(width), num(height));
  out += "<style>\n"
         ".glyph { fill: #222; fill-opacity: 0.35; stroke: #222; stroke-width: 0.75; }\n"
         "text { font-family: sans-serif; font-size: 11px; fill: #000; }\n"
         ".caption { font-weight: bold; }\n"
         "</style>\n";
  out += fmt::format("<rect class=\"background\" x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#fff\"/>\n", num(width),
                     num(height));
  write_legend(out, kMargin, kMargin);

  double oy = kMargin + kLegendHeight;
  for (const auto& p : panels) {
    write_panel(out, p, spec, k, kMargin, oy);
    oy += panel_height(p, spec) + kPanelGap;
  }
  out += "</svg>\n";
  return out;
}

}  // namespace svg

inline std::string render_svg(const FlowField& field, std::span<const std::string> tokens, const PlotSpec& spec) {
  const svg::Panel panel{&field, tokens, spec.highlight_columns, {}};
  return svg::render(std::span(&panel, 1), spec);
}

/// Two panels stacked vertically (a on top) sharing one legend and one
/// ellipse scale, so glyph sizes are comparable across panels.
inline std::string render_comparison(const FlowField& field_a, const FlowField& field_b,
                                     std::span<const std::string> tokens_a, std::span<const std::string> tokens_b,
                                     const PlotSpec& spec, const std::set<std::size_t>& highlight_a,
                                     const std::set<std::size_t>& highlight_b) {
  const svg::Panel panels[] = {{&field_a, tokens_a, highlight_a, "a"}, {&field_b, tokens_b, highlight_b, "b"}};
  return svg::render(panels, spec);
}

}  // namespace donald
