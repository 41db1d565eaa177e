#pragma once

// Token-layer matrix construction and structure-tensor estimation.
//
// Axis convention throughout: x runs along tokens (columns), y along layers
// (rows). A field is a Grid<double> with L rows and T columns.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "donald/error.hpp"
#include "donald/grid.hpp"
#include "donald/ingest.hpp"

namespace donald {

/// Ridge added to the tensor diagonal and used as division guard.
inline constexpr double kTensorEpsilon = 1e-12;
/// Guard in the min-max normalization denominator.
inline constexpr double kNormEpsilon = 1e-12;

inline constexpr double kDefaultSigmaGrad = 1.0;
inline constexpr double kDefaultSigmaTensor = 1.5;

enum class Normalization { None, Row, Column, Global };

inline constexpr std::string_view to_string(Normalization n) {
  switch (n) {
    case Normalization::None: return "none";
    case Normalization::Row: return "row";
    case Normalization::Column: return "column";
    case Normalization::Global: return "global";
  }
  return "none";
}

inline std::optional<Normalization> parse_normalization(std::string_view s) {
  if (s == "none") return Normalization::None;
  if (s == "row") return Normalization::Row;
  if (s == "column") return Normalization::Column;
  if (s == "global") return Normalization::Global;
  return std::nullopt;
}

struct TokenLayerMatrix {
  Field m;
  Normalization normalization = Normalization::None;

  std::size_t layers() const noexcept { return m.rows(); }
  std::size_t tokens() const noexcept { return m.cols(); }
};

struct DerivativeFields {
  Field dx;  // token-to-token
  Field dy;  // layer-to-layer
  double sigma_x = 0.0;
  double sigma_y = 0.0;
};

/// Smoothed second moments. The stored components carry no ridge; tensor
/// entries including the ridge are exposed through the accessors.
struct StructureTensorField {
  Field jxx;
  Field jxy;
  Field jyy;
  double sigma_tensor = 0.0;
  double epsilon = kTensorEpsilon;

  std::size_t layers() const noexcept { return jxx.rows(); }
  std::size_t tokens() const noexcept { return jxx.cols(); }

  double xx(std::size_t i, std::size_t j) const { return jxx(i, j) + epsilon; }
  double xy(std::size_t i, std::size_t j) const { return jxy(i, j); }
  double yy(std::size_t i, std::size_t j) const { return jyy(i, j) + epsilon; }
};

struct LayerUtilization {
  std::size_t layer = 0;  // 1-based, layer 1 is the first transformer block
  double utilization = 0.0;
};

struct UtilizationReport {
  std::vector<LayerUtilization> per_layer;
  double mean = 0.0;
  double std_dev = 0.0;
};

inline TokenLayerMatrix collapse_hidden_units(const EmbeddingSpace& space) {
  TokenLayerMatrix out{Field(space.num_layers(), space.num_tokens()), Normalization::None};
  const auto h = static_cast<double>(space.num_hidden());
  for (std::size_t i = 0; i < space.num_layers(); ++i) {
    for (std::size_t j = 0; j < space.num_tokens(); ++j) {
      const auto units = space.hidden(i, j);
      out.m(i, j) = std::accumulate(units.begin(), units.end(), 0.0) / h;
    }
  }
  return out;
}

namespace detail {

// `cells(f)` applies f to every element of one normalization scope.
template <typename Visit>
void minmax_scope(Visit&& cells) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  cells([&](double& v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  });
  const double span = hi - lo;
  cells([&](double& v) { v = span > 0.0 ? (v - lo) / (span + kNormEpsilon) : 0.0; });
}

}  // namespace detail

/// Min-max maps each scope (row, column or whole matrix) onto [0, 1].
/// A constant scope becomes all zeros.
inline TokenLayerMatrix normalize(const TokenLayerMatrix& matrix, Normalization mode) {
  TokenLayerMatrix out{matrix.m, mode};
  Field& m = out.m;
  switch (mode) {
    case Normalization::None:
      break;
    case Normalization::Row:
      for (std::size_t i = 0; i < m.rows(); ++i)
        detail::minmax_scope([&](auto&& f) {
          for (std::size_t j = 0; j < m.cols(); ++j) f(m(i, j));
        });
      break;
    case Normalization::Column:
      for (std::size_t j = 0; j < m.cols(); ++j)
        detail::minmax_scope([&](auto&& f) {
          for (std::size_t i = 0; i < m.rows(); ++i) f(m(i, j));
        });
      break;
    case Normalization::Global:
      detail::minmax_scope([&](auto&& f) {
        for (double& v : m.values()) f(v);
      });
      break;
  }
  return out;
}

/// Centred differences in the interior, one-sided at the edges. Unit spacing.
inline DerivativeFields central_gradients(const TokenLayerMatrix& matrix) {
  const Field& m = matrix.m;
  const std::size_t rows = m.rows(), cols = m.cols();
  if (rows < 2 || cols < 2)
    throw Error(ErrorCode::DegenerateAxis, "gradients need at least 2 layers and 2 tokens, got " +
                                               std::to_string(rows) + "x" + std::to_string(cols));
  DerivativeFields d{Field(rows, cols), Field(rows, cols), 0.0, 0.0};
  for (std::size_t i = 0; i < rows; ++i) {
    d.dx(i, 0) = m(i, 1) - m(i, 0);
    for (std::size_t j = 1; j + 1 < cols; ++j) d.dx(i, j) = (m(i, j + 1) - m(i, j - 1)) / 2.0;
    d.dx(i, cols - 1) = m(i, cols - 1) - m(i, cols - 2);
  }
  for (std::size_t j = 0; j < cols; ++j) {
    d.dy(0, j) = m(1, j) - m(0, j);
    for (std::size_t i = 1; i + 1 < rows; ++i) d.dy(i, j) = (m(i + 1, j) - m(i - 1, j)) / 2.0;
    d.dy(rows - 1, j) = m(rows - 1, j) - m(rows - 2, j);
  }
  return d;
}

/// Mirror an out-of-range index back into [0, n) without repeating the edge
/// sample: -1 -> 1, n -> n-2. Periodic with period 2(n-1) for large offsets.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  i %= period;
  if (i < 0) i += period;
  const auto last = static_cast<std::ptrdiff_t>(n - 1);
  return static_cast<std::size_t>(i <= last ? i : period - i);
}

/// Normalized samples of exp(-k^2 / 2 sigma^2) for k in [-r, r], r = ceil(3 sigma).
/// sigma == 0 gives the one-tap identity kernel.
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    throw Error(ErrorCode::InvalidArgument, "sigma must be finite and non-negative");
  if (sigma == 0.0) return {1.0};
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    const double v = std::exp(-static_cast<double>(k * k) / (2.0 * sigma * sigma));
    w[static_cast<std::size_t>(k + radius)] = v;
    sum += v;
  }
  for (double& v : w) v /= sum;
  return w;
}

/// Separable Gaussian blur with reflect padding; x along columns, y along rows.
inline Field gaussian_smooth(const Field& field, double sigma_x, double sigma_y) {
  const auto kx = gaussian_kernel(sigma_x);
  const auto ky = gaussian_kernel(sigma_y);
  const std::size_t rows = field.rows(), cols = field.cols();
  const auto rx = static_cast<std::ptrdiff_t>(kx.size() / 2);
  const auto ry = static_cast<std::ptrdiff_t>(ky.size() / 2);

  Field tmp = field;
  if (kx.size() > 1) {
    std::vector<std::size_t> idx(cols * kx.size());
    for (std::size_t j = 0; j < cols; ++j)
      for (std::ptrdiff_t k = -rx; k <= rx; ++k)
        idx[j * kx.size() + static_cast<std::size_t>(k + rx)] =
            reflect_index(static_cast<std::ptrdiff_t>(j) + k, cols);
    for (std::size_t i = 0; i < rows; ++i) {
      const auto src = field.row(i);
      auto dst = tmp.row(i);
      for (std::size_t j = 0; j < cols; ++j) {
        double acc = 0.0;
        const std::size_t* ix = &idx[j * kx.size()];
        for (std::size_t k = 0; k < kx.size(); ++k) acc += kx[k] * src[ix[k]];
        dst[j] = acc;
      }
    }
  }
  if (ky.size() == 1) return tmp;

  Field out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    auto dst = out.row(i);
    for (std::ptrdiff_t k = -ry; k <= ry; ++k) {
      const double w = ky[static_cast<std::size_t>(k + ry)];
      const auto src = tmp.row(reflect_index(static_cast<std::ptrdiff_t>(i) + k, rows));
      for (std::size_t j = 0; j < cols; ++j) dst[j] += w * src[j];
    }
  }
  return out;
}

inline DerivativeFields smooth_derivatives(const DerivativeFields& d, double sigma_x, double sigma_y) {
  return {gaussian_smooth(d.dx, sigma_x, sigma_y), gaussian_smooth(d.dy, sigma_x, sigma_y), sigma_x, sigma_y};
}

inline StructureTensorField assemble_structure_tensors(const DerivativeFields& derivs, double sigma_tensor) {
  const std::size_t rows = derivs.dx.rows(), cols = derivs.dx.cols();
  Field xx(rows, cols), xy(rows, cols), yy(rows, cols);
  const auto dx = derivs.dx.values();
  const auto dy = derivs.dy.values();
  auto pxx = xx.values(), pxy = xy.values(), pyy = yy.values();
  for (std::size_t k = 0; k < dx.size(); ++k) {
    pxx[k] = dx[k] * dx[k];
    pxy[k] = dx[k] * dy[k];
    pyy[k] = dy[k] * dy[k];
  }
  return {gaussian_smooth(xx, sigma_tensor, sigma_tensor), gaussian_smooth(xy, sigma_tensor, sigma_tensor),
          gaussian_smooth(yy, sigma_tensor, sigma_tensor), sigma_tensor, kTensorEpsilon};
}

/// Share of a cell's diffusion along the token axis, from the ridged diagonal:
/// (jxx + eps) / ((jxx + eps) + (jyy + eps)). Cells with no gradient give 0.5.
inline double token_share(const StructureTensorField& t, std::size_t i, std::size_t j) {
  const double a = t.xx(i, j);
  return a / (a + t.yy(i, j));
}

inline UtilizationReport utilization_rates(const StructureTensorField& tensors) {
  UtilizationReport report;
  const std::size_t rows = tensors.layers(), cols = tensors.tokens();
  report.per_layer.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) sum += token_share(tensors, i, j);
    report.per_layer.push_back({i + 1, sum / static_cast<double>(cols)});
  }
  if (rows == 0) return report;
  double total = 0.0;
  for (const auto& l : report.per_layer) total += l.utilization;
  report.mean = total / static_cast<double>(rows);
  double ss = 0.0;
  for (const auto& l : report.per_layer) ss += (l.utilization - report.mean) * (l.utilization - report.mean);
  report.std_dev = std::sqrt(ss / static_cast<double>(rows));
  return report;
}

}  // namespace donald
