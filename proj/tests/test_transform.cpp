#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "awcm/transform.hpp"
#include "oracles.hpp"

namespace {

using namespace awcm;

Array2D sample(int n0, int level, const std::function<double(double, double)>& f) {
  const int n = dense_extent(n0, level);
  Array2D a(n, n);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) a(ix, iy) = f(double(ix) / (n - 1), double(iy) / (n - 1));
  return a;
}

double max_abs(const Array2D& a) {
  double m = 0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

double max_diff(const Array2D& a, const Array2D& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

double max_detail(const CoefficientSet& c) {
  const int s0 = 1 << c.j_max();
  double m = 0;
  for (int iy = 0; iy < c.data().ny(); ++iy)
    for (int ix = 0; ix < c.data().nx(); ++ix)
      if (ix % s0 != 0 || iy % s0 != 0) m = std::max(m, std::abs(c.data()(ix, iy)));
  return m;
}

TEST(Transform, ConstantFieldHasNoDetails) {
  const auto fb = build_filter_bank(6);
  const auto f = sample(8, 3, [](double, double) { return 2.5; });
  const auto c = forward(f, 8, fb);
  EXPECT_EQ(max_detail(c), 0.0);
  for (int k2 = 0; k2 <= 8; ++k2)
    for (int k1 = 0; k1 <= 8; ++k1) EXPECT_EQ(c.s0(k1, k2), 2.5);
}

TEST(Transform, VanishingMomentsOnCubicTimesQuadratic) {
  const auto fb = build_filter_bank(4);
  for (int levels : {1, 3, 5}) {
    const auto f = sample(4, levels, [](double x, double y) { return x * x * x * y * y; });
    const auto c = forward(f, 4, fb);
    EXPECT_LT(max_detail(c), 1e-10 * max_abs(f)) << "levels=" << levels;
  }
}

TEST(Transform, PolynomialsBelowOrderGiveZeroDetailsAllOrders) {
  for (int p : {2, 4, 6, 8}) {
    const auto fb = build_filter_bank(p);
    const auto f = sample(8, 3, [p](double x, double y) { return std::pow(x - 0.2, p - 1) + std::pow(0.7 - y, p - 1) + x * y; });
    const auto c = forward(f, 8, fb);
    EXPECT_LT(max_detail(c), 1e-10 * max_abs(f)) << "p=" << p;
  }
}

TEST(Transform, RandomRoundTrip) {
  const auto fb = build_filter_bank(6);
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Array2D f(dense_extent(8, 5), dense_extent(8, 5));
  for (double& v : f.data()) v = u(rng);
  const auto back = inverse(forward(f, 8, fb), fb);
  EXPECT_LT(max_diff(f, back) / max_abs(f), 1e-12);
}

TEST(Transform, OneDimensionalRoundTripAndMoments) {
  const auto fb = build_filter_bank(8);
  std::vector<double> f(dense_extent(8, 4));
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::sin(7.0 * i / f.size()) + 0.1 * i;
  const auto c = forward_1d(f, 8, fb);
  const auto back = inverse_1d(c, 8, fb);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(back[i], f[i], 1e-13);

  std::vector<double> poly(dense_extent(8, 3));
  for (std::size_t i = 0; i < poly.size(); ++i) poly[i] = std::pow(double(i) / poly.size(), 7);
  const auto cp = forward_1d(poly, 8, fb);
  for (std::size_t i = 0; i < cp.size(); ++i)
    if (i % 8 != 0) {
      EXPECT_LT(std::abs(cp[i]), 1e-12);
    }
}

TEST(Transform, ZeroCoefficientsGiveZeroField) {
  const auto fb = build_filter_bank(4);
  const int n = dense_extent(4, 2);
  const auto f = inverse(CoefficientSet(Array2D(n, n, 0.0), 4, 2), fb);
  EXPECT_EQ(max_abs(f), 0.0);
}

TEST(Transform, SingleDetailIsTensorBasisFunction) {
  const auto fb = build_filter_bank(4);
  const int n0 = 4, top = 3;
  const int n = dense_extent(n0, top);
  CoefficientSet c(Array2D(n, n, 0.0), n0, top);
  // level 2, lambda 3, centre of the level-2 lattice (odd, odd)
  const int k = 7;
  c.detail(2, 3, k, k) = 1.0;
  const auto f = inverse(c, fb);
  // psi x psi is separable: f(ix,iy) = g(ix) g(iy) where g is the 1D synthesis of a unit detail.
  std::vector<double> line(n, 0.0);
  line[static_cast<std::size_t>(k << (top - 2))] = 1.0;
  const auto g = inverse_1d(line, n0, fb);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) EXPECT_NEAR(f(ix, iy), g[ix] * g[iy], 1e-15);
  const auto again = forward(f, n0, fb);
  EXPECT_NEAR(again.detail(2, 3, k, k), 1.0, 1e-14);
  double others = 0;
  for (std::size_t i = 0; i < again.data().size(); ++i)
    if (i != static_cast<std::size_t>((k << 1) * n + (k << 1))) others = std::max(others, std::abs(again.data().data()[i]));
  EXPECT_LT(others, 1e-14);
}

TEST(Transform, ModelProfileRoundTripsAgainstDirectEvaluation) {
  const auto fb = build_filter_bank(6);
  const auto exact = [](double x, double y) { return oracle::model_exact(x, y, 0.0, 0.01); };
  const auto f = sample(8, 5, exact);
  const auto back = inverse(forward(f, 8, fb), fb);
  const int n = f.nx();
  double err = 0;
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) err = std::max(err, std::abs(back(ix, iy) - exact(double(ix) / (n - 1), double(iy) / (n - 1))));
  EXPECT_LT(err, 1e-12);
}

TEST(Transform, Linearity) {
  const auto fb = build_filter_bank(6);
  const auto f = sample(8, 3, [](double x, double y) { return std::exp(-20 * (x - 0.4) * (x - 0.4)) * std::cos(3 * y); });
  const auto g = sample(8, 3, [](double x, double y) { return std::tanh(10 * (x + y - 1)); });
  Array2D h(f.nx(), f.ny());
  for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] = 2.0 * f.data()[i] - 3.0 * g.data()[i];
  const auto cf = forward(f, 8, fb), cg = forward(g, 8, fb), ch = forward(h, 8, fb);
  double m = 0;
  for (std::size_t i = 0; i < h.size(); ++i)
    m = std::max(m, std::abs(ch.data().data()[i] - (2.0 * cf.data().data()[i] - 3.0 * cg.data().data()[i])));
  EXPECT_LT(m, 1e-12 * max_abs(h));
}

TEST(Transform, CoefficientCountEqualsPointCount) {
  const auto fb = build_filter_bank(4);
  const int n0 = 4, top = 3;
  std::size_t count = static_cast<std::size_t>(n0 + 1) * (n0 + 1);
  for (int j = 1; j <= top; ++j) {
    const std::size_t fine = static_cast<std::size_t>(dense_extent(n0, j));
    const std::size_t coarse = static_cast<std::size_t>(dense_extent(n0, j - 1));
    count += fine * fine - coarse * coarse;  // lambda 1, 2, 3 together
  }
  const auto n = static_cast<std::size_t>(dense_extent(n0, top));
  EXPECT_EQ(count, n * n);
  const auto c = forward(Array2D(int(n), int(n), 1.0), n0, fb);
  EXPECT_EQ(c.data().size(), n * n);
}

TEST(Transform, ThresholdLargeEpsKeepsOnlyLevelZero) {
  const auto fb = build_filter_bank(6);
  const auto f = sample(8, 3, [](double x, double y) { return std::sin(4 * x) * y; });
  const auto c = threshold(forward(f, 8, fb), 1e6);
  EXPECT_EQ(count_retained(c), 81u);
}

TEST(Transform, GaussianThresholdErrorWithinTenEps) {
  const auto fb = build_filter_bank(6);
  const auto f = sample(8, 6, [](double x, double y) { return std::exp(-((x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5)) / 0.01); });
  const double eps = 1e-4;
  const auto fe = inverse(threshold(forward(f, 8, fb), eps), fb);
  const double err = max_diff(f, fe);
  EXPECT_LT(err / eps, 10.0);
  EXPECT_GT(err, 0.0);
}

TEST(Transform, Errors) {
  const auto fb = build_filter_bank(6);
  EXPECT_THROW(forward(Array2D(10, 10), 8, fb), TransformError);
  EXPECT_THROW(forward(Array2D(17, 33), 8, fb), TransformError);
  EXPECT_THROW(forward(Array2D(9, 9), 4, fb), TransformError);  // 4 base cells too few for p=6
  EXPECT_THROW(inverse(CoefficientSet(Array2D(9, 9), 8, 2), fb), TransformError);
  EXPECT_THROW(threshold(CoefficientSet(Array2D(9, 9), 8, 0), 0.0), TransformError);
}

}  // namespace
