#pragma once

// Embedded explicit Runge-Kutta pairs with an error-per-step controller.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace awcm {

class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Butcher tableau with two weight vectors of adjacent orders.
struct TableauPair {
  std::string name;
  std::vector<double> c;
  std::vector<std::vector<double>> a;  // strictly lower triangular rows
  std::vector<double> b_low;           // propagated solution
  std::vector<double> b_high;          // error reference
  int low_order = 0;
  int high_order = 0;

  int stages() const { return static_cast<int>(c.size()); }

  /// Bogacki-Shampine 3(2) pair, 4 stages.
  static TableauPair rk23() {
    TableauPair t;
    t.name = "rk23";
    t.c = {0.0, 0.5, 0.75, 1.0};
    t.a = {{}, {0.5}, {0.0, 0.75}, {2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0}};
    t.b_high = {2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0, 0.0};
    t.b_low = {7.0 / 24.0, 0.25, 1.0 / 3.0, 0.125};
    t.low_order = 2;
    t.high_order = 3;
    return t;
  }

  /// Runge-Kutta-Fehlberg 4(5) pair, 6 stages.
  static TableauPair rkf45() {
    TableauPair t;
    t.name = "rkf45";
    t.c = {0.0, 0.25, 0.375, 12.0 / 13.0, 1.0, 0.5};
    t.a = {{},
           {0.25},
           {3.0 / 32.0, 9.0 / 32.0},
           {1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0},
           {439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0},
           {-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0}};
    t.b_high = {16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0};
    t.b_low = {25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -0.2, 0.0};
    t.low_order = 4;
    t.high_order = 5;
    return t;
  }

  static TableauPair by_name(const std::string& name) {
    if (name == "rk23") return rk23();
    if (name == "rkf45") return rkf45();
    throw std::invalid_argument("unknown integrator '" + name + "' (expected rk23 or rkf45)");
  }
};

struct StepController {
  double eps_target = 1e-3;
  double dt = 1e-3;
  double safety = 0.9;
  double dt_min = 1e-12;
  double dt_max = 1.0;
  /// Stability ceiling supplied by the caller (e.g. CFL); infinite when unused.
  double dt_ceiling = std::numeric_limits<double>::infinity();
  double last_error_estimate = 0.0;

  double clamp(double x) const { return std::clamp(std::min(x, dt_ceiling), dt_min, std::max(dt_min, std::min(dt_max, dt_ceiling))); }
};

struct StepResult {
  std::vector<double> trial;
  double error_estimate = 0.0;
  bool accepted = false;
  double dt_used = 0.0;
  double dt_new = 0.0;
};

using RhsFunction = std::function<void(double t, std::span<const double> u, std::span<double> dudt)>;
/// Applied to every stage state and to both embedded solutions (Dirichlet injection).
using StageHook = std::function<void(double t, std::span<double> u)>;

/// One embedded step from (t, u) with the controller's current dt.
/// `error_weights` scales |u_high - u_low| per component (empty: unit weights).
/// The controller's dt is updated to the proposed next step.
inline StepResult rk_step(double t, std::span<const double> u, const RhsFunction& rhs, const TableauPair& tab,
                          StepController& ctl, std::span<const double> error_weights = {},
                          const StageHook& hook = nullptr) {
  if (!(ctl.dt > 0.0)) throw IntegrationError("time step must be positive");
  const std::size_t n = u.size();
  const int s = tab.stages();
  const double dt = ctl.dt;
  std::vector<std::vector<double>> k(static_cast<std::size_t>(s), std::vector<double>(n));
  std::vector<double> stage(n);
  for (int i = 0; i < s; ++i) {
    for (std::size_t q = 0; q < n; ++q) {
      double acc = 0.0;
      for (int j = 0; j < i; ++j) acc += tab.a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * k[static_cast<std::size_t>(j)][q];
      stage[q] = u[q] + dt * acc;
    }
    const double ts = t + tab.c[static_cast<std::size_t>(i)] * dt;
    if (hook && i > 0) hook(ts, stage);
    if (i == 0) std::copy(u.begin(), u.end(), stage.begin());
    auto& ki = k[static_cast<std::size_t>(i)];
    rhs(ts, stage, ki);
    for (double x : ki)
      if (!std::isfinite(x)) throw IntegrationError("non-finite right-hand side at stage " + std::to_string(i));
  }
  StepResult res;
  res.dt_used = dt;
  res.trial.resize(n);
  std::vector<double> high(n);
  for (std::size_t q = 0; q < n; ++q) {
    double lo = 0.0, hi = 0.0;
    for (int j = 0; j < s; ++j) {
      lo += tab.b_low[static_cast<std::size_t>(j)] * k[static_cast<std::size_t>(j)][q];
      hi += tab.b_high[static_cast<std::size_t>(j)] * k[static_cast<std::size_t>(j)][q];
    }
    res.trial[q] = u[q] + dt * lo;
    high[q] = u[q] + dt * hi;
  }
  if (hook) {
    hook(t + dt, res.trial);
    hook(t + dt, high);
  }
  double err = 0.0;
  for (std::size_t q = 0; q < n; ++q) {
    const double w = error_weights.empty() ? 1.0 : error_weights[q];
    err = std::max(err, std::abs(high[q] - res.trial[q]) * w);
  }
  if (!std::isfinite(err)) throw IntegrationError("non-finite error estimate");
  res.error_estimate = err;
  res.accepted = err <= ctl.eps_target;

  double proposal;
  if (err == 0.0) proposal = ctl.dt_max;
  else proposal = ctl.safety * dt * std::pow(ctl.eps_target / err, 1.0 / (tab.low_order + 1));
  if (!res.accepted) {
    if (dt <= ctl.dt_min) {
      throw IntegrationError("time step underflow: error " + std::to_string(err) + " > " +
                             std::to_string(ctl.eps_target) + " at dt_min=" + std::to_string(ctl.dt_min));
    }
    proposal = std::min(proposal, dt);
  } else {
    ctl.last_error_estimate = err;
  }
  res.dt_new = ctl.clamp(proposal);
  ctl.dt = res.dt_new;
  return res;
}

}  // namespace awcm
