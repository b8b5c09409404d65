#include <gtest/gtest.h>

#include <cmath>

#include "awcm/time_integrator.hpp"
#include "oracles.hpp"

namespace {

using namespace awcm;

/// Fixed-step integration of du/dt = -u + sin(t) to t=1; returns |error|.
double fixed_step_error(const TableauPair& tab, int steps) {
  const auto rhs = [](double t, std::span<const double> u, std::span<double> d) { d[0] = -u[0] + std::sin(t); };
  const auto exact = [](double t) { return 1.5 * std::exp(-t) + 0.5 * (std::sin(t) - std::cos(t)); };
  std::vector<double> u{1.0};
  double t = 0;
  const double dt = 1.0 / steps;
  for (int s = 0; s < steps; ++s) {
    StepController ctl;
    ctl.dt = dt;
    ctl.eps_target = 1e300;
    ctl.dt_max = 1e300;
    u = rk_step(t, u, rhs, tab, ctl).trial;
    t += dt;
  }
  return std::abs(u[0] - exact(1.0));
}

TEST(TimeIntegrator, ZeroRhsKeepsStateAndGrowsStep) {
  for (const auto& tab : {TableauPair::rk23(), TableauPair::rkf45()}) {
    StepController ctl;
    ctl.dt = 0.01;
    ctl.dt_max = 0.5;
    std::vector<double> u{1.0, -2.0};
    const auto r = rk_step(0.0, u, [](double, std::span<const double>, std::span<double> d) { std::fill(d.begin(), d.end(), 0.0); }, tab, ctl);
    EXPECT_TRUE(r.accepted);
    EXPECT_EQ(r.trial, u);
    EXPECT_EQ(r.dt_new, 0.5);
  }
}

TEST(TimeIntegrator, TableauConsistency) {
  for (const auto& tab : {TableauPair::rk23(), TableauPair::rkf45()}) {
    double sl = 0, sh = 0;
    for (int i = 0; i < tab.stages(); ++i) {
      sl += tab.b_low[i];
      sh += tab.b_high[i];
      double row = 0;
      for (double a : tab.a[i]) row += a;
      EXPECT_NEAR(row, tab.c[i], 1e-15);
    }
    EXPECT_NEAR(sl, 1.0, 1e-15);
    EXPECT_NEAR(sh, 1.0, 1e-15);
  }
}

TEST(TimeIntegrator, ExponentialDecayAdaptive) {
  const auto rhs = [](double, std::span<const double> u, std::span<double> d) { d[0] = -u[0]; };
  StepController ctl;
  ctl.eps_target = 1e-8;
  ctl.dt = 0.1;
  std::vector<double> u{1.0};
  double t = 0;
  const auto tab = TableauPair::rkf45();
  while (t < 1.0 - 1e-14) {
    ctl.dt = std::min(ctl.dt, 1.0 - t);
    const auto r = rk_step(t, u, rhs, tab, ctl);
    if (r.accepted) {
      t += r.dt_used;
      u = r.trial;
    }
  }
  EXPECT_NEAR(u[0], std::exp(-1.0), 1e-6);
}

TEST(TimeIntegrator, StepRejectedWhenTooLarge) {
  const auto rhs = [](double, std::span<const double> u, std::span<double> d) { d[0] = -50 * u[0]; };
  StepController ctl;
  ctl.eps_target = 1e-6;
  ctl.dt = 0.5;
  const auto r = rk_step(0.0, std::vector<double>{1.0}, rhs, TableauPair::rk23(), ctl);
  EXPECT_FALSE(r.accepted);
  EXPECT_LT(r.dt_new, 0.5);
}

TEST(TimeIntegrator, UnderflowAndNonFinite) {
  StepController ctl;
  ctl.eps_target = 1e-30;
  ctl.dt = 1e-12;
  ctl.dt_min = 1e-12;
  const auto rhs = [](double, std::span<const double> u, std::span<double> d) { d[0] = 1e6 * u[0] * u[0]; };
  EXPECT_THROW(rk_step(0.0, std::vector<double>{1e6}, rhs, TableauPair::rk23(), ctl), IntegrationError);
  StepController c2;
  const auto bad = [](double, std::span<const double>, std::span<double> d) { d[0] = std::nan(""); };
  EXPECT_THROW(rk_step(0.0, std::vector<double>{1.0}, bad, TableauPair::rk23(), c2), IntegrationError);
  EXPECT_THROW(TableauPair::by_name("euler"), std::invalid_argument);
}

TEST(TimeIntegrator, ObservedOrders) {
  const auto e23a = fixed_step_error(TableauPair::rk23(), 20), e23b = fixed_step_error(TableauPair::rk23(), 40);
  EXPECT_NEAR(std::log2(e23a / e23b), 2.0, 0.2);
  const auto e45a = fixed_step_error(TableauPair::rkf45(), 10), e45b = fixed_step_error(TableauPair::rkf45(), 20);
  EXPECT_NEAR(std::log2(e45a / e45b), 4.0, 0.3);
}

}  // namespace
