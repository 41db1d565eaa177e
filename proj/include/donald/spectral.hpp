#pragma once

// Per-cell eigen-analysis of structure tensors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>

#include "donald/error.hpp"
#include "donald/grid.hpp"
#include "donald/tensor_field.hpp"

namespace donald {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct Eigen2 {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  Vec2 v1{1.0, 0.0};
};

/// Closed-form eigensolve of [[xx, xy], [xy, yy]]. v1 is the unit eigenvector
/// of the larger eigenvalue, signed so that x > 0 (or x == 0 and y > 0).
/// Equal eigenvalues give v1 = (1, 0).
inline Eigen2 eigendecompose_2x2(double xx, double xy, double yy) {
  const double diff = xx - yy;
  const double disc = std::hypot(diff, 2.0 * xy);
  const double tr = xx + yy;
  Eigen2 e{(tr + disc) / 2.0, (tr - disc) / 2.0, {1.0, 0.0}};
  if (disc == 0.0) return e;

  // Both (l1 - yy, xy) and (xy, l1 - xx) are eigenvectors; pick the one
  // whose leading term avoids cancellation.
  Vec2 v = diff >= 0.0 ? Vec2{(diff + disc) / 2.0, xy} : Vec2{xy, (disc - diff) / 2.0};
  const double n = std::hypot(v.x, v.y);
  v.x /= n;
  v.y /= n;
  if (v.x < 0.0 || (v.x == 0.0 && v.y < 0.0)) v = {-v.x, -v.y};
  if (v.x == 0.0) v.x = 0.0;  // drop a negative zero
  e.v1 = v;
  return e;
}

/// (l1 - l2) / (l1 + l2 + eps) with tiny negative eigenvalues clamped to 0.
/// Always in [0, 1): when eps is lost to rounding the result is pinned just below 1.
inline double anisotropy(double lambda1, double lambda2) {
  lambda1 = std::max(lambda1, 0.0);
  lambda2 = std::max(lambda2, 0.0);
  const double a = (lambda1 - lambda2) / (lambda1 + lambda2 + kTensorEpsilon);
  if (a >= 1.0) return std::nextafter(1.0, 0.0);
  return std::max(a, 0.0);
}

/// Orientation of v1 in [0, pi). Zero is along the token axis.
inline double principal_angle(const Vec2& v1) {
  double theta = std::atan2(v1.y, v1.x);
  if (theta < 0.0) theta += std::numbers::pi;
  if (theta >= std::numbers::pi) theta -= std::numbers::pi;
  return theta;
}

struct FlowField {
  Field lambda1;
  Field lambda2;
  Field v1x;
  Field v1y;
  Field anisotropy;
  // Ridged tensor entries, kept for off-grid queries.
  Field txx;
  Field txy;
  Field tyy;

  std::size_t layers() const noexcept { return lambda1.rows(); }
  std::size_t tokens() const noexcept { return lambda1.cols(); }
  Vec2 direction(std::size_t i, std::size_t j) const { return {v1x(i, j), v1y(i, j)}; }
};

inline FlowField flow_field(const StructureTensorField& tensors) {
  const std::size_t rows = tensors.layers(), cols = tensors.tokens();
  FlowField f{Field(rows, cols), Field(rows, cols), Field(rows, cols), Field(rows, cols),
              Field(rows, cols), Field(rows, cols), Field(rows, cols), Field(rows, cols)};
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double xx = tensors.xx(i, j), xy = tensors.xy(i, j), yy = tensors.yy(i, j);
      const Eigen2 e = eigendecompose_2x2(xx, xy, yy);
      f.lambda1(i, j) = e.lambda1;
      f.lambda2(i, j) = e.lambda2;
      f.v1x(i, j) = e.v1.x;
      f.v1y(i, j) = e.v1.y;
      f.anisotropy(i, j) = anisotropy(e.lambda1, e.lambda2);
      f.txx(i, j) = xx;
      f.txy(i, j) = xy;
      f.tyy(i, j) = yy;
    }
  }
  return f;
}

struct FlowSample {
  Vec2 direction;
  double anisotropy = 0.0;
};

namespace detail {

struct Bilinear {
  std::size_t r0, c0, r1, c1;
  double fr, fc;

  double operator()(const Field& g) const {
    const double top = (1.0 - fc) * g(r0, c0) + fc * g(r0, c1);
    const double bottom = (1.0 - fc) * g(r1, c0) + fc * g(r1, c1);
    return (1.0 - fr) * top + fr * bottom;
  }
};

inline void bracket(double coord, std::size_t n, std::size_t& lo, std::size_t& hi, double& frac) {
  if (n == 1) {
    lo = hi = 0;
    frac = 0.0;
    return;
  }
  lo = std::min(static_cast<std::size_t>(std::floor(coord)), n - 2);
  hi = lo + 1;
  frac = coord - static_cast<double>(lo);
}

}  // namespace detail

/// Samples the field at a continuous point; x is the token coordinate in
/// [0, T-1], y the layer coordinate in [0, L-1]. Anisotropy is interpolated
/// bilinearly; the direction comes from bilinearly interpolated tensor
/// entries so that v1 and -v1 never average out.
inline FlowSample query_at(const FlowField& field, double x, double y) {
  const double max_x = static_cast<double>(field.tokens()) - 1.0;
  const double max_y = static_cast<double>(field.layers()) - 1.0;
  if (field.lambda1.empty() || !(x >= 0.0 && x <= max_x) || !(y >= 0.0 && y <= max_y))
    throw Error(ErrorCode::OutOfBounds, "query (" + std::to_string(x) + ", " + std::to_string(y) +
                                            ") outside [0, " + std::to_string(max_x) + "] x [0, " +
                                            std::to_string(max_y) + "]");
  detail::Bilinear b{};
  detail::bracket(y, field.layers(), b.r0, b.r1, b.fr);
  detail::bracket(x, field.tokens(), b.c0, b.c1, b.fc);
  const Eigen2 e = eigendecompose_2x2(b(field.txx), b(field.txy), b(field.tyy));
  return {e.v1, b(field.anisotropy)};
}

}  // namespace donald
