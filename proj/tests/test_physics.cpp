#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "awcm/physics.hpp"
#include "oracles.hpp"

namespace {

using namespace awcm;

struct Dense {
  SparseField field;
  FilterBank fb;
  OperatorSet ops;
};

Dense dense_field(int n0, int level, int p, int nvars, const std::array<double, 2>& hi = {1.0, 1.0}) {
  GridGeometry g;
  g.n0 = n0;
  g.j_cap = level;
  g.hi = hi;
  std::vector<DyadicIndex> ids;
  const int n = g.extent(level);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) ids.push_back(canonical_index(level, x, y));
  auto fb = build_filter_bank(p);
  auto ops = OperatorSet::build(fb);
  return {SparseField::from_indices(g, nvars, ids), std::move(fb), std::move(ops)};
}

TEST(Physics, ModelSolutionSpotValues) {
  EXPECT_DOUBLE_EQ(model_exact(0.0, 0.5, 0.5, 0.01), 1.0);
  EXPECT_DOUBLE_EQ(model_exact(0.0, 0.0, 0.0, 0.01), 1.0);
  EXPECT_DOUBLE_EQ(model_exact(0.3, 0.25 - 0.1, 0.25, 0.01), model_exact(0.3, 0.25 + 0.1, 0.25, 0.01));
  EXPECT_DOUBLE_EQ(model_exact(0.3, 0.7, 0.2, 0.01), oracle::model_exact(0.3, 0.7, 0.2, 0.01));
}

TEST(Physics, AdvectionDiffusionOfLinearFieldIsExact) {
  auto d = dense_field(8, 2, 6, 1);
  AdvectionDiffusion sys({{0.5, 1.0}, 0.01}, BoundaryMode::kInject);
  StencilPlan plan(d.field, d.fb, d.ops);
  std::vector<double> u(d.field.size()), dudt(d.field.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const auto p = d.field.position(i);
    u[i] = p[0] + 2.0 * p[1];
  }
  sys.rhs(0.0, d.field, plan, u, dudt);
  for (double r : dudt) EXPECT_NEAR(r, -(0.5 + 2.0), 1e-10);
}

TEST(Physics, AdvectionDiffusionMatchesTimeDerivativeOfExactSolution) {
  // Away from the steep corner the semi-discrete RHS tracks du/dt.
  auto d = dense_field(8, 4, 6, 1);
  const double nu = 0.01, t = 0.5;
  AdvectionDiffusion sys({{0.0, 1.0}, nu}, BoundaryMode::kInject);
  StencilPlan plan(d.field, d.fb, d.ops);
  std::vector<double> u(d.field.size()), dudt(d.field.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const auto p = d.field.position(i);
    u[i] = model_exact(p[0], p[1], t, nu);
  }
  sys.rhs(t, d.field, plan, u, dudt);
  double worst = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const auto p = d.field.position(i);
    if (p[0] < 0.25) continue;
    const double a = p[0] + 5 * nu, b = t - p[1];
    const double exact = -10.0 * nu * a * b / std::pow(a * a + b * b, 2);
    worst = std::max(worst, std::abs(dudt[i] - exact));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Physics, InjectionSetsBoundaryData) {
  auto d = dense_field(8, 1, 4, 1);
  AdvectionDiffusion sys({{0.0, 1.0}, 0.01}, BoundaryMode::kInject);
  std::vector<double> u(d.field.size(), -7.0);
  sys.apply_boundary(0.3, d.field, u);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const auto p = d.field.position(i);
    const bool edge = p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0;
    if (edge) EXPECT_DOUBLE_EQ(u[i], model_exact(p[0], p[1], 0.3, 0.01));
    else EXPECT_EQ(u[i], -7.0);
  }
}

TEST(Physics, PenaltyVanishesOnExactDataAndPullsTowardIt) {
  auto d = dense_field(8, 1, 4, 1);
  const auto bnd = boundary_points(d.field);
  EXPECT_EQ(bnd.size(), std::size_t{4 * 16});
  const auto spec = BoundarySpec::dirichlet([](double, double, double, int) { return 2.0; });
  std::vector<double> u(d.field.size(), 2.0), rhs(d.field.size(), 0.0);
  apply_penalty(d.field, bnd, spec, 0.0, 1.0, 1, u, rhs, [](int, std::size_t, int) { return 0.0; });
  for (double r : rhs) EXPECT_EQ(r, 0.0);
  std::fill(u.begin(), u.end(), 3.0);
  apply_penalty(d.field, bnd, spec, 0.0, 1.0, 1, u, rhs, [](int, std::size_t, int) { return 0.0; });
  const double tau = 1.0 / d.field.geometry().spacing(0, 1);
  for (const auto& b : bnd) EXPECT_DOUBLE_EQ(rhs[b.entry], -tau);
}

TEST(Physics, NeumannPenaltyOfEvenProfileIsSmall) {
  auto d = dense_field(8, 3, 6, 1);
  StencilPlan plan(d.field, d.fb, d.ops);
  std::vector<double> u(d.field.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const auto p = d.field.position(i);
    u[i] = std::cos(std::numbers::pi * p[0]) * std::cos(std::numbers::pi * p[1]);
  }
  const auto gx = plan.derivative(0, 1, u);
  const auto gy = plan.derivative(1, 1, u);
  BoundarySpec spec;
  for (auto& f : spec.faces) f = {BoundaryKind::kNeumann, [](double, double, double, int) { return 0.0; }};
  std::vector<double> rhs(u.size(), 0.0);
  apply_penalty(d.field, boundary_points(d.field), spec, 0.0, 1.0, 1, u, rhs,
                [&](int, std::size_t e, int axis) { return axis == 0 ? gx[e] : gy[e]; });
  for (double r : rhs) EXPECT_LT(std::abs(r), 1e-3);
}

TEST(Physics, MissingFaceIsReported) {
  auto d = dense_field(8, 0, 4, 1);
  BoundarySpec spec;
  std::vector<double> u(d.field.size());
  EXPECT_THROW(apply_dirichlet(d.field, boundary_points(d.field), spec, 0.0, 1, u), PhysicsError);
}

TEST(Physics, SedovAmbientState) {
  NavierStokes ns(MaterialParams{}, SedovSetup{}, BoundaryMode::kInject);
  const double rho = 101325.0 / (0.4 * 718.0 * 300.0);
  std::array<double, 4> s{};
  ns.initial(0.0, 0.0, s);
  EXPECT_NEAR(s[0], rho, 1e-12);
  EXPECT_EQ(s[1], 0.0);
  ns.initial(1.0, 1.0, s);
  EXPECT_NEAR(s[3], (101325.0 + 2e6) / 0.4, 1e-6);
  EXPECT_NEAR(ns.sound_speed(rho, 0, 0, 101325.0 / 0.4), std::sqrt(1.4 * 101325.0 / rho), 1e-9);
  EXPECT_NEAR(ns.sound_speed(rho, 0, 0, 101325.0 / 0.4), 347.3, 0.05);
}

TEST(Physics, FreeStreamIsPreserved) {
  auto d = dense_field(16, 1, 8, 4, {2.0, 2.0});
  NavierStokes ns(MaterialParams{}, SedovSetup{}, BoundaryMode::kInject);
  StencilPlan plan(d.field, d.fb, d.ops);
  const std::size_t n = d.field.size();
  const double rho = 1.2, vx = 80.0, vy = -30.0, p = 1e5;
  std::vector<double> u(4 * n), dudt(4 * n);
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = rho;
    u[n + i] = rho * vx;
    u[2 * n + i] = rho * vy;
    u[3 * n + i] = p / 0.4 + 0.5 * rho * (vx * vx + vy * vy);
  }
  ns.rhs(0.0, d.field, plan, u, dudt);
  for (double r : dudt) EXPECT_EQ(r, 0.0);
}

TEST(Physics, NonPhysicalStateIsReported) {
  auto d = dense_field(16, 0, 8, 4, {2.0, 2.0});
  NavierStokes ns(MaterialParams{}, SedovSetup{}, BoundaryMode::kInject);
  StencilPlan plan(d.field, d.fb, d.ops);
  std::vector<double> u(4 * d.field.size(), 1.0), dudt(u.size());
  u[3] = -1.0;
  EXPECT_THROW(ns.rhs(0.0, d.field, plan, u, dudt), PhysicsError);
}

TEST(Physics, InvalidMaterialIsRejected) {
  MaterialParams m;
  m.gamma = 1.0;
  EXPECT_THROW(NavierStokes(m, SedovSetup{}, BoundaryMode::kInject), PhysicsError);
}

TEST(Physics, PressurePulseAcceleratesOutward) {
  auto d = dense_field(16, 2, 8, 4, {2.0, 2.0});
  NavierStokes ns(MaterialParams{}, SedovSetup{}, BoundaryMode::kInject);
  StencilPlan plan(d.field, d.fb, d.ops);
  const std::size_t n = d.field.size();
  std::vector<double> u(4 * n), dudt(4 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = d.field.position(i);
    std::array<double, 4> s{};
    ns.initial(p[0], p[1], s);
    for (int v = 0; v < 4; ++v) u[static_cast<std::size_t>(v) * n + i] = s[static_cast<std::size_t>(v)];
  }
  ns.rhs(0.0, d.field, plan, u, dudt);
  // d(rho u)/dt = -dp/dx, positive right of the centre.
  const std::size_t right = d.field.find_lattice(2, 36, 32);
  const std::size_t left = d.field.find_lattice(2, 28, 32);
  ASSERT_NE(right, npos);
  EXPECT_GT(dudt[n + right], 0.0);
  EXPECT_DOUBLE_EQ(dudt[n + right], -dudt[n + left]);
  // Density is unchanged at rest.
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(dudt[i], 0.0);
}

}  // namespace
