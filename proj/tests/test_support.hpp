#pragma once

// Shared fixtures and independent oracles. Nothing here calls into the
// library's numeric code paths.

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "donald/grid.hpp"
#include "donald/npy.hpp"

namespace donald::testing {

inline Field random_field(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0,
                          double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Field f(rows, cols);
  for (double& v : f.values()) v = dist(rng);
  return f;
}

/// Mirror index without edge repetition, written out as repeated folding.
inline std::size_t oracle_reflect(long i, long n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return static_cast<std::size_t>(i);
}

inline std::vector<double> oracle_kernel(double sigma) {
  if (sigma == 0.0) return {1.0};
  const long r = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> w;
  double sum = 0.0;
  for (long k = -r; k <= r; ++k) {
    w.push_back(std::exp(-double(k * k) / (2.0 * sigma * sigma)));
    sum += w.back();
  }
  for (double& v : w) v /= sum;
  return w;
}

/// Dense 2-D convolution with the outer-product kernel, one output cell at a time.
inline Field oracle_dense_smooth(const Field& f, double sx, double sy) {
  const auto kx = oracle_kernel(sx);
  const auto ky = oracle_kernel(sy);
  const long rx = long(kx.size() / 2), ry = long(ky.size() / 2);
  const long rows = long(f.rows()), cols = long(f.cols());
  Field out(f.rows(), f.cols());
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (long a = -ry; a <= ry; ++a)
        for (long b = -rx; b <= rx; ++b)
          acc += ky[std::size_t(a + ry)] * kx[std::size_t(b + rx)] *
                 f(oracle_reflect(i + a, rows), oracle_reflect(j + b, cols));
      out(std::size_t(i), std::size_t(j)) = acc;
    }
  return out;
}

struct OracleTensors {
  Field xx, xy, yy;
};

/// Straight-line pipeline: gradients, dense smoothing, products, dense smoothing.
inline OracleTensors oracle_tensors(const Field& m, double sigma_grad, double sigma_tensor) {
  const std::size_t rows = m.rows(), cols = m.cols();
  Field gx(rows, cols), gy(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      gx(i, j) = j == 0 ? m(i, 1) - m(i, 0)
                 : j == cols - 1 ? m(i, j) - m(i, j - 1)
                                 : 0.5 * (m(i, j + 1) - m(i, j - 1));
      gy(i, j) = i == 0 ? m(1, j) - m(0, j)
                 : i == rows - 1 ? m(i, j) - m(i - 1, j)
                                 : 0.5 * (m(i + 1, j) - m(i - 1, j));
    }
  gx = oracle_dense_smooth(gx, sigma_grad, sigma_grad);
  gy = oracle_dense_smooth(gy, sigma_grad, sigma_grad);
  Field pxx(rows, cols), pxy(rows, cols), pyy(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      pxx(i, j) = gx(i, j) * gx(i, j);
      pxy(i, j) = gx(i, j) * gy(i, j);
      pyy(i, j) = gy(i, j) * gy(i, j);
    }
  return {oracle_dense_smooth(pxx, sigma_tensor, sigma_tensor), oracle_dense_smooth(pxy, sigma_tensor, sigma_tensor),
          oracle_dense_smooth(pyy, sigma_tensor, sigma_tensor)};
}

inline std::vector<double> oracle_utilization(const OracleTensors& t) {
  const double eps = 1e-12;
  std::vector<double> u;
  for (std::size_t i = 0; i < t.xx.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < t.xx.cols(); ++j) s += (t.xx(i, j) + eps) / (t.xx(i, j) + t.yy(i, j) + 2 * eps);
    u.push_back(s / double(t.xx.cols()));
  }
  return u;
}

/// Per-test scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("donald_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Writes an array plus optional sidecar the way the extractor does.
inline std::filesystem::path write_states(const std::filesystem::path& npy, std::vector<std::size_t> shape,
                                          const std::vector<double>& data, const nlohmann::json* meta = nullptr,
                                          npy::Dtype dtype = npy::Dtype::Float32) {
  npy::save(npy, shape, data, dtype);
  if (meta) {
    auto mp = npy;
    mp.replace_extension(".meta.json");
    std::ofstream(mp) << meta->dump();
  }
  return npy;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace donald::testing
