#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "awcm/derivative.hpp"
#include "oracles.hpp"

namespace {

using namespace awcm;

std::vector<double> line(int n, const std::function<double(double)>& f) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = f(double(i) / (n - 1));
  return v;
}

TEST(Derivative, FourthOrderFirstDerivativeWeights) {
  const auto op = build_diff_operator(build_filter_bank(4), 0, 1);
  // Autocorrelation of the p=4 refinement mask gives these weights.
  const std::vector<double> expect{1.0 / 12, -2.0 / 3, 0.0, 2.0 / 3, -1.0 / 12};
  ASSERT_EQ(op.radius(), 2);
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(op.interior()[i], expect[i], 1e-13);
}

TEST(Derivative, InteriorWeightsSatisfyMoments) {
  for (int p : {4, 6, 8}) {
    for (int alpha : {1, 2}) {
      const auto op = build_diff_operator(build_filter_bank(p), 0, alpha);
      const int r = op.radius();
      for (int q = 0; q < p; ++q) {
        double m = 0, scale = 0;
        for (int n = -r; n <= r; ++n) {
          m += op.interior()[static_cast<std::size_t>(n + r)] * std::pow(double(n), q);
          scale += std::abs(op.interior()[static_cast<std::size_t>(n + r)] * std::pow(double(n), q));
        }
        const double want = q == alpha ? (alpha == 1 ? 1.0 : 2.0) : 0.0;
        EXPECT_NEAR(m, want, 1e-11 * (1 + scale)) << "p=" << p << " alpha=" << alpha << " q=" << q;
      }
    }
  }
}

TEST(Derivative, ConstantGivesZero) {
  const auto op = build_diff_operator(build_filter_bank(6), 0, 1);
  const auto f = line(65, [](double) { return 3.0; });
  for (double d : apply_line(op, f, 1.0 / 64)) EXPECT_NEAR(d, 0.0, 1e-10);
}

TEST(Derivative, SecondDerivativeOfQuadratic) {
  const auto op = build_diff_operator(build_filter_bank(6), 0, 2);
  const auto f = line(33, [](double x) { return x * x; });
  for (double d : apply_line(op, f, 1.0 / 32)) EXPECT_NEAR(d, 2.0, 1e-8);
}

TEST(Derivative, MonomialsBelowOrderExactEverywhere) {
  for (int p : {4, 6, 8}) {
    const auto fb = build_filter_bank(p);
    for (int alpha : {1, 2}) {
      const auto op = build_diff_operator(fb, 0, alpha);
      for (int n : {p + alpha, 2 * p + 1, 41}) {
        for (int q = 0; q < p; ++q) {
          const auto f = line(n, [q](double x) { return std::pow(x, q); });
          const auto d = apply_line(op, f, 1.0 / (n - 1));
          for (int i = 0; i < n; ++i) {
            const double x = double(i) / (n - 1);
            const double want = q < alpha ? 0.0 : (alpha == 1 ? q * std::pow(x, q - 1) : q * (q - 1) * std::pow(x, q - 2));
            EXPECT_NEAR(d[static_cast<std::size_t>(i)], want, 1e-7 * (n * n)) << "p=" << p << " a=" << alpha << " n=" << n;
          }
        }
      }
    }
  }
}

TEST(Derivative, SineConvergesFast) {
  const auto op = build_diff_operator(build_filter_bank(6), 0, 1);
  const int n = dense_extent(8, 6);
  const double pi = std::numbers::pi;
  const auto f = line(n, [pi](double x) { return std::sin(2 * pi * x); });
  const auto d = apply_line(op, f, 1.0 / (n - 1));
  double err = 0;
  for (int i = 0; i < n; ++i) err = std::max(err, std::abs(d[static_cast<std::size_t>(i)] - 2 * pi * std::cos(2 * pi * double(i) / (n - 1))));
  EXPECT_LT(err, 1e-6);
}

TEST(Derivative, MirrorSymmetry) {
  for (int alpha : {1, 2}) {
    const auto op = build_diff_operator(build_filter_bank(6), 0, alpha);
    for (int n : {7, 9, 13, 33}) {
      const auto f = line(n, [](double x) { return std::cos(3 * x) + x * x * x; });
      std::vector<double> g(f.rbegin(), f.rend());
      const auto df = apply_line(op, f, 1.0);
      const auto dg = apply_line(op, g, 1.0);
      const double s = alpha == 1 ? -1.0 : 1.0;
      for (int i = 0; i < n; ++i) EXPECT_EQ(dg[static_cast<std::size_t>(i)], s * df[static_cast<std::size_t>(n - 1 - i)]) << alpha << ' ' << n << ' ' << i;
    }
  }
}

TEST(Derivative, Errors) {
  const auto fb2 = build_filter_bank(2);
  EXPECT_THROW(build_diff_operator(fb2, 0, 2), DerivativeError);
  const auto fb = build_filter_bank(4);
  EXPECT_THROW(build_diff_operator(fb, 0, 3), DerivativeError);
  EXPECT_THROW(build_diff_operator(fb, 2, 1), DerivativeError);
  const auto op = build_diff_operator(fb, 0, 1);
  EXPECT_THROW(op.line_stencil(5, 5), DerivativeError);
  EXPECT_THROW(op.line_stencil(0, 1), DerivativeError);
}

TEST(Derivative, SparseEqualsDenseOnDenseGrid) {
  const auto fb = build_filter_bank(6);
  const auto ops = OperatorSet::build(fb);
  GridGeometry g;
  g.n0 = 8;
  g.j_cap = 3;
  std::vector<DyadicIndex> ids;
  const int n = dense_extent(8, 3);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) ids.push_back(canonical_index(3, x, y));
  auto f = SparseField::from_indices(g, 1, ids);
  Array2D dense(n, n);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto p = lattice_position(f.index(i), 3);
    const auto x = f.position(i);
    dense(p[0], p[1]) = f.values(0)[i] = std::sin(3 * x[0]) * std::cos(2 * x[1]);
  }
  StencilPlan plan(f, fb, ops);
  EXPECT_EQ(plan.ghost_count(), 0u);
  for (int axis : {0, 1})
    for (int alpha : {1, 2}) {
      const auto ds = plan.derivative(axis, alpha, f.values(0));
      const auto dd = apply(ops.get(axis, alpha), dense, 1.0 / (n - 1));
      for (std::size_t i = 0; i < f.size(); ++i) {
        const auto p = lattice_position(f.index(i), 3);
        EXPECT_NEAR(ds[i], dd(p[0], p[1]), 1e-10 * std::max(1.0, std::abs(dd(p[0], p[1]))));
      }
    }
}

TEST(Derivative, SparseWithGhostsApproximatesExact) {
  const auto fb = build_filter_bank(6);
  const auto ops = OperatorSet::build(fb);
  GridGeometry g;
  g.n0 = 8;
  g.j_cap = 6;
  const int top = 6, n = dense_extent(8, top);
  Array2D dense(n, n);
  const auto u = [](double x, double y) { return std::tanh(20 * (x - 0.5)) + 0.1 * y * y; };
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) dense(ix, iy) = u(double(ix) / (n - 1), double(iy) / (n - 1));
  const auto f = compress(forward(dense, 8, fb), 1e-5, g, fb);
  StencilPlan plan(f, fb, ops);
  EXPECT_GT(plan.ghost_count(), 0u);
  const auto dx = plan.derivative(0, 1, f.values(0));
  const auto dyy = plan.derivative(1, 2, f.values(0));
  double ex = 0, ey = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto p = f.position(i);
    const double t = std::tanh(20 * (p[0] - 0.5));
    ex = std::max(ex, std::abs(dx[i] - 20 * (1 - t * t)));
    ey = std::max(ey, std::abs(dyy[i] - 0.2));
  }
  EXPECT_LT(ex, 1e-2 * 20);
  EXPECT_LT(ey, 1e-2);
}

}  // namespace
