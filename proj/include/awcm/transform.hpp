#pragma once

// Dense forward (F) and inverse (B) interpolating wavelet transforms, 1D and
// separable 2D. Coefficients are stored in place on the finest lattice.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "awcm/filters.hpp"

namespace awcm {

class TransformError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Points per axis on level j of a grid with n0 base cells.
constexpr int dense_extent(int n0, int level) { return (n0 << level) + 1; }

/// Row-major 2D array: (ix, iy) -> data[iy * nx + ix].
class Array2D {
 public:
  Array2D() = default;
  Array2D(int nx, int ny, double fill = 0.0)
      : nx_(nx), ny_(ny), data_(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny), fill) {}

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(int ix, int iy) { return data_[static_cast<std::size_t>(iy) * nx_ + ix]; }
  double operator()(int ix, int iy) const { return data_[static_cast<std::size_t>(iy) * nx_ + ix]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

 private:
  int nx_ = 0;
  int ny_ = 0;
  std::vector<double> data_;
};

namespace detail {

inline int infer_level(int extent, int n0) {
  if (n0 < 1) throw TransformError("base cell count must be positive");
  if (extent < n0 + 1) throw TransformError("grid extent smaller than the level-0 grid");
  const int cells = extent - 1;
  if (cells % n0 != 0) throw TransformError("grid extent " + std::to_string(extent) + " is not 2^j*n0+1");
  int ratio = cells / n0;
  int level = 0;
  while (ratio > 1) {
    if (ratio % 2 != 0) throw TransformError("grid extent " + std::to_string(extent) + " is not 2^j*n0+1");
    ratio /= 2;
    ++level;
  }
  return level;
}

inline void check_stencil_fits(int n0, const FilterBank& fb) {
  if (n0 + 1 < fb.min_coarse_nodes()) {
    throw TransformError("grid too small for stencil: n0=" + std::to_string(n0) + " needs at least " +
                         std::to_string(fb.min_coarse_nodes() - 1) + " base cells for order " +
                         std::to_string(fb.order()));
  }
}

/// Prediction along a strided line. `at(i)` returns the value at coarse node i.
template <class At>
double predict_line(const PredictionStencil& s, At&& at) {
  double acc = 0.0;
  for (const Tap& t : s.taps) acc += t.weight_a * at(t.a) + t.weight_b * at(t.b);
  return acc;
}

/// Stencils for every odd point of a level whose coarse line has n_coarse nodes.
inline std::vector<PredictionStencil> level_stencils(const FilterBank& fb, int n_coarse) {
  std::vector<PredictionStencil> out;
  out.reserve(static_cast<std::size_t>(n_coarse - 1));
  for (int m = 0; m + 1 < n_coarse; ++m) out.push_back(fb.prediction_stencil(m, n_coarse));
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// 1D

/// In-place 1D forward transform of a line with 2^J*n0+1 samples.
inline std::vector<double> forward_1d(std::vector<double> f, int n0, const FilterBank& fb) {
  const int levels = detail::infer_level(static_cast<int>(f.size()), n0);
  detail::check_stencil_fits(n0, fb);
  for (int j = levels; j >= 1; --j) {
    const int stride = 1 << (levels - j);
    const int n_coarse = dense_extent(n0, j - 1);
    const auto stencils = detail::level_stencils(fb, n_coarse);
    for (int m = 0; m + 1 < n_coarse; ++m) {
      const double pred = detail::predict_line(stencils[static_cast<std::size_t>(m)],
                                               [&](int i) { return f[static_cast<std::size_t>(2 * i * stride)]; });
      f[static_cast<std::size_t>((2 * m + 1) * stride)] -= pred;
    }
  }
  return f;
}

inline std::vector<double> inverse_1d(std::vector<double> c, int n0, const FilterBank& fb) {
  const int levels = detail::infer_level(static_cast<int>(c.size()), n0);
  detail::check_stencil_fits(n0, fb);
  for (int j = 1; j <= levels; ++j) {
    const int stride = 1 << (levels - j);
    const int n_coarse = dense_extent(n0, j - 1);
    const auto stencils = detail::level_stencils(fb, n_coarse);
    for (int m = 0; m + 1 < n_coarse; ++m) {
      const double pred = detail::predict_line(stencils[static_cast<std::size_t>(m)],
                                               [&](int i) { return c[static_cast<std::size_t>(2 * i * stride)]; });
      c[static_cast<std::size_t>((2 * m + 1) * stride)] += pred;
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// 2D

/// Multiresolution coefficients of a 2D field, stored in place on the
/// level-j_max lattice. The point (ix, iy) holds s0 when both indices lie on
/// the level-0 lattice and otherwise the detail of the unique (j, lambda, k)
/// that owns it.
class CoefficientSet {
 public:
  CoefficientSet() = default;
  CoefficientSet(Array2D data, int n0, int j_max) : data_(std::move(data)), n0_(n0), j_max_(j_max) {}

  int n0() const { return n0_; }
  int j_max() const { return j_max_; }
  const Array2D& data() const { return data_; }
  Array2D& data() { return data_; }

  /// Level-0 scaling coefficient at level-0 position (k1, k2).
  double s0(int k1, int k2) const { return data_(k1 << j_max_, k2 << j_max_); }

  /// Detail of subband lambda at level j, position k on the level-j lattice.
  double detail(int j, int lambda, int k1, int k2) const { return data_(pos(j, lambda, k1, k2, 0), pos(j, lambda, k1, k2, 1)); }
  double& detail(int j, int lambda, int k1, int k2) { return data_(pos(j, lambda, k1, k2, 0), pos(j, lambda, k1, k2, 1)); }

  /// Throws unless the level structure matches the stored lattice.
  void validate() const {
    if (n0_ < 1 || j_max_ < 0) throw TransformError("malformed level structure: n0 or j_max invalid");
    const int n = dense_extent(n0_, j_max_);
    if (data_.nx() != n || data_.ny() != n) {
      throw TransformError("malformed level structure: expected " + std::to_string(n) + "^2 lattice, got " +
                           std::to_string(data_.nx()) + "x" + std::to_string(data_.ny()));
    }
  }

 private:
  int pos(int j, int lambda, int k1, int k2, int axis) const {
    if (j < 1 || j > j_max_ || lambda < 1 || lambda > 3) throw TransformError("detail index out of range");
    const bool odd1 = (k1 & 1) != 0;
    const bool odd2 = (k2 & 1) != 0;
    const int expected = (odd1 ? 1 : 0) + (odd2 ? 2 : 0);
    if (expected != lambda) throw TransformError("position parity does not match subband");
    const int shift = j_max_ - j;
    return (axis == 0 ? k1 : k2) << shift;
  }

  Array2D data_;
  int n0_ = 0;
  int j_max_ = 0;
};

/// 2D forward transform: one x pass then one y pass per level, finest first.
inline CoefficientSet forward(const Array2D& values, int n0, const FilterBank& fb) {
  const int levels = detail::infer_level(values.nx(), n0);
  if (detail::infer_level(values.ny(), n0) != levels) throw TransformError("dimension mismatch between axes");
  detail::check_stencil_fits(n0, fb);
  Array2D a = values;
  for (int j = levels; j >= 1; --j) {
    const int stride = 1 << (levels - j);
    const int n_coarse = dense_extent(n0, j - 1);
    const int n_fine = dense_extent(n0, j);
    const auto stencils = detail::level_stencils(fb, n_coarse);
    // x pass over every level-j row
    for (int r = 0; r < n_fine; ++r) {
      const int iy = r * stride;
      for (int m = 0; m + 1 < n_coarse; ++m) {
        const double pred = detail::predict_line(stencils[static_cast<std::size_t>(m)],
                                                 [&](int i) { return a(2 * i * stride, iy); });
        a((2 * m + 1) * stride, iy) -= pred;
      }
    }
    // y pass over every level-j column
    for (int c = 0; c < n_fine; ++c) {
      const int ix = c * stride;
      for (int m = 0; m + 1 < n_coarse; ++m) {
        const double pred = detail::predict_line(stencils[static_cast<std::size_t>(m)],
                                                 [&](int i) { return a(ix, 2 * i * stride); });
        a(ix, (2 * m + 1) * stride) -= pred;
      }
    }
  }
  return CoefficientSet(std::move(a), n0, levels);
}

inline Array2D inverse(const CoefficientSet& coeffs, const FilterBank& fb) {
  coeffs.validate();
  const int n0 = coeffs.n0();
  const int levels = coeffs.j_max();
  detail::check_stencil_fits(n0, fb);
  Array2D a = coeffs.data();
  for (int j = 1; j <= levels; ++j) {
    const int stride = 1 << (levels - j);
    const int n_coarse = dense_extent(n0, j - 1);
    const int n_fine = dense_extent(n0, j);
    const auto stencils = detail::level_stencils(fb, n_coarse);
    for (int c = 0; c < n_fine; ++c) {
      const int ix = c * stride;
      for (int m = 0; m + 1 < n_coarse; ++m) {
        const double pred = detail::predict_line(stencils[static_cast<std::size_t>(m)],
                                                 [&](int i) { return a(ix, 2 * i * stride); });
        a(ix, (2 * m + 1) * stride) += pred;
      }
    }
    for (int r = 0; r < n_fine; ++r) {
      const int iy = r * stride;
      for (int m = 0; m + 1 < n_coarse; ++m) {
        const double pred = detail::predict_line(stencils[static_cast<std::size_t>(m)],
                                                 [&](int i) { return a(2 * i * stride, iy); });
        a((2 * m + 1) * stride, iy) += pred;
      }
    }
  }
  return a;
}

/// Zeroes every detail with |d| < eps. Level-0 scaling coefficients are kept.
inline CoefficientSet threshold(const CoefficientSet& coeffs, double eps) {
  if (!(eps > 0.0)) throw TransformError("threshold must be positive");
  coeffs.validate();
  CoefficientSet out = coeffs;
  const int stride0 = 1 << coeffs.j_max();
  Array2D& a = out.data();
  for (int iy = 0; iy < a.ny(); ++iy) {
    for (int ix = 0; ix < a.nx(); ++ix) {
      if (ix % stride0 == 0 && iy % stride0 == 0) continue;
      if (std::abs(a(ix, iy)) < eps) a(ix, iy) = 0.0;
    }
  }
  return out;
}

/// Number of retained (nonzero or level-0) coefficients.
inline std::size_t count_retained(const CoefficientSet& coeffs) {
  const int stride0 = 1 << coeffs.j_max();
  std::size_t n = 0;
  const Array2D& a = coeffs.data();
  for (int iy = 0; iy < a.ny(); ++iy)
    for (int ix = 0; ix < a.nx(); ++ix)
      if ((ix % stride0 == 0 && iy % stride0 == 0) || a(ix, iy) != 0.0) ++n;
  return n;
}

}  // namespace awcm
