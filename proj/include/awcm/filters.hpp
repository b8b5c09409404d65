#pragma once

// Deslauriers-Dubuc interpolating filter banks with one-sided boundary rows.

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/rational.hpp>

namespace awcm {

using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

class FilterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One term of a 1D stencil contraction: weight_a * f[a] + weight_b * f[b].
///
/// Symmetric stencils store mirrored nodes as one pair so that a reflected
/// field produces a bit-for-bit reflected result. Single taps carry
/// weight_b == 0 and b == a.
struct Tap {
  int a = 0;
  int b = 0;
  double weight_a = 0.0;
  double weight_b = 0.0;
};

/// Lagrange basis weights for `nodes` evaluated at `x`.
inline std::vector<Rational> lagrange_weights(const std::vector<Rational>& nodes, const Rational& x) {
  std::vector<Rational> w(nodes.size());
  for (std::size_t m = 0; m < nodes.size(); ++m) {
    Rational num(1), den(1);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (i == m) continue;
      num *= x - nodes[i];
      den *= nodes[m] - nodes[i];
    }
    w[m] = num / den;
  }
  return w;
}

/// Weights of the `deriv`-th derivative of the Lagrange interpolant through
/// `nodes`, evaluated at `x`. Exact on polynomials of degree < nodes.size().
inline std::vector<Rational> lagrange_derivative_weights(const std::vector<Rational>& nodes,
                                                         const Rational& x, int deriv) {
  const std::size_t n = nodes.size();
  std::vector<Rational> w(n);
  for (std::size_t m = 0; m < n; ++m) {
    // Expand L_m about x: coefficients c[i] of (t - x)^i.
    std::vector<Rational> c{Rational(1)};
    Rational den(1);
    for (std::size_t i = 0; i < n; ++i) {
      if (i == m) continue;
      const Rational shift = x - nodes[i];  // (t - nodes[i]) = (t - x) + shift
      std::vector<Rational> next(c.size() + 1, Rational(0));
      for (std::size_t q = 0; q < c.size(); ++q) {
        next[q] += c[q] * shift;
        next[q + 1] += c[q];
      }
      c = std::move(next);
      den *= nodes[m] - nodes[i];
    }
    Rational factorial(1);
    for (int q = 2; q <= deriv; ++q) factorial *= q;
    const auto d = static_cast<std::size_t>(deriv);
    w[m] = d < c.size() ? c[d] * factorial / den : Rational(0);
  }
  return w;
}

/// Prediction stencil for the odd point between coarse nodes m and m+1.
struct PredictionStencil {
  std::vector<Tap> taps;  // node indices on the coarse line
};

class FilterBank {
 public:
  static constexpr int kMaxOrder = 8;

  int order() const { return p_; }

  /// Interior prediction weights for coarse nodes m-p/2+1 .. m+p/2.
  const std::vector<Rational>& prediction() const { return prediction_; }

  /// Left boundary rows, indexed by m in [0, p/2-1); weights for nodes 0..p-1.
  /// Right rows are the mirror images.
  const std::vector<std::vector<Rational>>& boundary_rows() const { return boundary_rows_; }

  // Refinement-relation form of the four filters, keyed by tap offset.
  const std::map<int, Rational>& h() const { return h_; }
  const std::map<int, Rational>& h_dual() const { return h_dual_; }
  const std::map<int, Rational>& g() const { return g_; }
  const std::map<int, Rational>& g_dual() const { return g_dual_; }

  /// Minimum number of coarse nodes a line must have for the stencils to fit.
  int min_coarse_nodes() const { return p_; }

  /// Stencil predicting the midpoint between coarse nodes m and m+1 on a line
  /// of `n_coarse` nodes. Taps are ordered so that mirrored positions
  /// evaluate identically.
  PredictionStencil prediction_stencil(int m, int n_coarse) const {
    PredictionStencil s;
    s.taps.reserve(static_cast<std::size_t>(p_));
    visit_prediction(m, n_coarse, [&](const Tap& t) { s.taps.push_back(t); });
    return s;
  }

  /// Calls f(Tap) for each tap of prediction_stencil(m, n_coarse), without allocating.
  template <class F>
  void visit_prediction(int m, int n_coarse, F&& f) const {
    if (n_coarse < p_) {
      throw FilterError("line of " + std::to_string(n_coarse) + " coarse nodes is too short for order " +
                        std::to_string(p_));
    }
    if (m < 0 || m > n_coarse - 2) throw FilterError("prediction position out of range");
    const int half = p_ / 2;
    const int start = m - half + 1;
    if (start < 0) {
      const auto& row = boundary_float_[static_cast<std::size_t>(m)];
      for (int i = 0; i < p_; ++i) f(Tap{i, i, row[static_cast<std::size_t>(i)], 0.0});
    } else if (start + p_ > n_coarse) {
      const auto& row = boundary_float_[static_cast<std::size_t>(n_coarse - 2 - m)];
      for (int i = 0; i < p_; ++i) f(Tap{n_coarse - 1 - i, n_coarse - 1 - i, row[static_cast<std::size_t>(i)], 0.0});
    } else {
      // Innermost pair first.
      for (int i = 0; i < half; ++i) {
        const double wi = prediction_float_[static_cast<std::size_t>(half - 1 - i)];
        f(Tap{m - i, m + 1 + i, wi, wi});
      }
    }
  }

  friend FilterBank build_filter_bank(int p);

 private:
  static double w(const Rational& r) { return to_double(r); }

  int p_ = 0;
  std::vector<Rational> prediction_;
  std::vector<double> prediction_float_;
  std::vector<std::vector<Rational>> boundary_rows_;
  std::vector<std::vector<double>> boundary_float_;
  std::map<int, Rational> h_, h_dual_, g_, g_dual_;
};

/// Builds the order-p Deslauriers-Dubuc filter bank. p must be one of 2, 4, 6, 8.
inline FilterBank build_filter_bank(int p) {
  if (p <= 0 || p % 2 != 0) throw FilterError("filter order must be a positive even integer, got " + std::to_string(p));
  if (p > FilterBank::kMaxOrder) throw FilterError("unsupported order " + std::to_string(p) + " (maximum is 8)");

  FilterBank fb;
  fb.p_ = p;
  const int half = p / 2;

  // Coordinates doubled so the midpoint target stays integral: nodes 2n, target 2m+1.
  std::vector<Rational> nodes;
  for (int n = -half + 1; n <= half; ++n) nodes.emplace_back(2 * n);
  fb.prediction_ = lagrange_weights(nodes, Rational(1));
  for (const auto& r : fb.prediction_) fb.prediction_float_.push_back(to_double(r));

  std::vector<Rational> edge_nodes;
  for (int n = 0; n < p; ++n) edge_nodes.emplace_back(2 * n);
  for (int m = 0; m < half - 1; ++m) fb.boundary_rows_.push_back(lagrange_weights(edge_nodes, Rational(2 * m + 1)));
  for (const auto& row : fb.boundary_rows_) {
    fb.boundary_float_.emplace_back();
    for (const auto& r : row) fb.boundary_float_.back().push_back(to_double(r));
  }

  // phi(x) = sum_k h_k phi(2x - k); psi(x) = phi(2x - 1).
  fb.h_[0] = Rational(1);
  for (int i = 0; i < p; ++i) {
    const int n = -half + 1 + i;
    fb.h_[1 - 2 * n] = fb.prediction_[static_cast<std::size_t>(i)];
  }
  fb.h_dual_[0] = Rational(1);
  fb.g_[1] = Rational(1);
  fb.g_dual_[0] = Rational(1);
  for (int i = 0; i < p; ++i) {
    const int n = -half + 1 + i;
    fb.g_dual_[2 * n - 1] = -fb.prediction_[static_cast<std::size_t>(i)];
  }
  return fb;
}

}  // namespace awcm
