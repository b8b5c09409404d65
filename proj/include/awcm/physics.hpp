#pragma once

// Right-hand sides and boundary treatment: the scalar advection-diffusion
// model and 2D compressible Navier-Stokes for a calorically perfect gas.

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "awcm/derivative.hpp"
#include "awcm/format.hpp"
#include "awcm/sparse_grid.hpp"

namespace awcm {

class PhysicsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Boundary conditions

enum class BoundaryKind { kDirichlet, kNeumann };
enum class BoundaryMode { kInject, kPenalty };

/// value(x, y, t, var): prescribed value, or outward normal derivative for Neumann.
using BoundaryValue = std::function<double(double, double, double, int)>;

struct FaceCondition {
  BoundaryKind kind = BoundaryKind::kDirichlet;
  BoundaryValue value;
};

/// Faces: 0 x=lo, 1 x=hi, 2 y=lo, 3 y=hi.
struct BoundarySpec {
  std::array<FaceCondition, 4> faces;

  static BoundarySpec dirichlet(BoundaryValue v) {
    BoundarySpec s;
    for (auto& f : s.faces) f = {BoundaryKind::kDirichlet, v};
    return s;
  }
};

struct BoundaryPoint {
  std::size_t entry;
  int face;
};

/// Boundary entries of a grid. Corners are assigned to their x face.
inline std::vector<BoundaryPoint> boundary_points(const SparseField& g) {
  std::vector<BoundaryPoint> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& idx = g.index(i);
    const int last = g.geometry().extent(idx.level) - 1;
    if (idx.k1 == 0) out.push_back({i, 0});
    else if (idx.k1 == last) out.push_back({i, 1});
    else if (idx.k2 == 0) out.push_back({i, 2});
    else if (idx.k2 == last) out.push_back({i, 3});
  }
  return out;
}

/// Overwrites Dirichlet boundary values with prescribed data. `u` holds
/// num_vars blocks of g.size() values.
inline void apply_dirichlet(const SparseField& g, std::span<const BoundaryPoint> bnd, const BoundarySpec& spec, double t,
                            int num_vars, std::span<double> u) {
  for (const auto& b : bnd) {
    const auto& face = spec.faces[static_cast<std::size_t>(b.face)];
    if (face.kind != BoundaryKind::kDirichlet) continue;
    if (!face.value) throw PhysicsError("boundary spec missing face " + std::to_string(b.face));
    const auto x = g.position(b.entry);
    for (int v = 0; v < num_vars; ++v) u[static_cast<std::size_t>(v) * g.size() + b.entry] = face.value(x[0], x[1], t, v);
  }
}

/// Adds -tau (B u - g) at boundary entries, tau = tau_scale / h_finest.
/// `normal_derivative(var, entry, axis)` supplies du/dx_axis for Neumann faces.
template <class NormalDerivative>
void apply_penalty(const SparseField& g, std::span<const BoundaryPoint> bnd, const BoundarySpec& spec, double t,
                   double tau_scale, int num_vars, std::span<const double> u, std::span<double> rhs,
                   NormalDerivative&& normal_derivative) {
  const int top = g.finest_level();
  const double h = std::min(g.geometry().spacing(0, top), g.geometry().spacing(1, top));
  const double tau = tau_scale / h;
  const std::size_t n = g.size();
  for (const auto& b : bnd) {
    const auto& face = spec.faces[static_cast<std::size_t>(b.face)];
    if (!face.value) throw PhysicsError("boundary spec missing face " + std::to_string(b.face));
    const auto x = g.position(b.entry);
    for (int v = 0; v < num_vars; ++v) {
      const std::size_t k = static_cast<std::size_t>(v) * n + b.entry;
      double bu;
      if (face.kind == BoundaryKind::kDirichlet) {
        bu = u[k];
      } else {
        const int axis = b.face / 2;
        const double sign = (b.face % 2 == 0) ? -1.0 : 1.0;
        bu = sign * normal_derivative(v, b.entry, axis);
      }
      rhs[k] -= tau * (bu - face.value(x[0], x[1], t, v));
    }
  }
}

// ---------------------------------------------------------------------------
// Systems

/// A semi-discrete PDE on a sparse grid. State vectors are variable-major:
/// num_vars() blocks of grid.size() values.
class System {
 public:
  virtual ~System() = default;
  virtual int num_vars() const = 0;
  virtual std::vector<std::string> var_names() const = 0;
  virtual void initial(double x, double y, std::span<double> out) const = 0;
  /// Time derivative at every grid entry.
  virtual void rhs(double t, const SparseField& grid, StencilPlan& plan, std::span<const double> u,
                   std::span<double> dudt) = 0;
  /// Stage hook; injects Dirichlet data in inject mode.
  virtual void apply_boundary(double t, const SparseField& grid, std::span<double> u) = 0;
  /// Explicit stability limit for the finest spacing of the grid.
  virtual double stable_dt(const SparseField& grid, std::span<const double> u) const = 0;
  /// Threshold scale per variable.
  virtual std::vector<double> scales() const = 0;
};

/// Spacing of the finest retained level.
inline double finest_spacing(const SparseField& g) {
  const int top = g.finest_level();
  return std::min(g.geometry().spacing(0, top), g.geometry().spacing(1, top));
}

/// Exact solution of the advection-diffusion model problem.
inline double model_exact(double x1, double x2, double t, double nu) {
  const double a = x1 + 5.0 * nu;
  const double b = t - x2;
  return 5.0 * nu * a / (a * a + b * b);
}

struct AdvectionDiffusionModel {
  std::array<double, 2> velocity{0.0, 1.0};
  double nu = 0.01;
};

/// du/dt = nu lap u - V . grad u with the closed-form solution as IC and
/// boundary data.
class AdvectionDiffusion : public System {
 public:
  AdvectionDiffusion(AdvectionDiffusionModel model, BoundaryMode mode, double tau_scale = 1.0, double cfl = 0.5,
                     double cfl_diffusive = 0.2)
      : model_(model), mode_(mode), tau_scale_(tau_scale), cfl_(cfl), cfl_diffusive_(cfl_diffusive) {
    if (model.nu < 0.0) throw PhysicsError("diffusivity must be non-negative");
    const double nu = model.nu;
    spec_ = BoundarySpec::dirichlet([nu](double x, double y, double t, int) { return model_exact(x, y, t, nu); });
  }

  const AdvectionDiffusionModel& model() const { return model_; }
  const BoundarySpec& boundary_spec() const { return spec_; }
  void set_boundary_spec(BoundarySpec s) { spec_ = std::move(s); }

  int num_vars() const override { return 1; }
  std::vector<std::string> var_names() const override { return {"u"}; }
  void initial(double x, double y, std::span<double> out) const override { out[0] = model_exact(x, y, 0.0, model_.nu); }
  std::vector<double> scales() const override { return {1.0}; }

  void rhs(double t, const SparseField& grid, StencilPlan& plan, std::span<const double> u, std::span<double> dudt) override {
    const std::size_t n = grid.size();
    for (double x : u)
      if (!std::isfinite(x)) throw PhysicsError("non-finite field value");
    plan.fill_into(u, buf_);
    d_.resize(n);
    std::fill(dudt.begin(), dudt.end(), 0.0);
    const std::array<std::pair<int, double>, 2> second{{{0, model_.nu}, {1, model_.nu}}};
    for (const auto& [axis, w] : second) {
      if (w == 0.0) continue;
      plan.apply(axis, 2, buf_, d_);
      for (std::size_t i = 0; i < n; ++i) dudt[i] += w * d_[i];
    }
    for (int axis = 0; axis < 2; ++axis) {
      const double v = model_.velocity[static_cast<std::size_t>(axis)];
      if (v == 0.0) continue;
      plan.apply(axis, 1, buf_, d_);
      for (std::size_t i = 0; i < n; ++i) dudt[i] -= v * d_[i];
    }
    if (mode_ == BoundaryMode::kPenalty) {
      const auto bnd = boundary_points(grid);
      std::array<std::vector<double>, 2> grad;
      for (int axis = 0; axis < 2; ++axis) {
        grad[static_cast<std::size_t>(axis)].resize(n);
        plan.apply(axis, 1, buf_, grad[static_cast<std::size_t>(axis)]);
      }
      apply_penalty(grid, bnd, spec_, t, tau_scale_, 1, u, dudt,
                    [&](int, std::size_t e, int axis) { return grad[static_cast<std::size_t>(axis)][e]; });
    }
  }

  void apply_boundary(double t, const SparseField& grid, std::span<double> u) override {
    if (mode_ != BoundaryMode::kInject) return;
    apply_dirichlet(grid, boundary_points(grid), spec_, t, 1, u);
  }

  double stable_dt(const SparseField& grid, std::span<const double>) const override {
    const double h = finest_spacing(grid);
    double dt = std::numeric_limits<double>::infinity();
    const double speed = std::hypot(model_.velocity[0], model_.velocity[1]);
    if (speed > 0.0) dt = std::min(dt, cfl_ * h / speed);
    if (model_.nu > 0.0) dt = std::min(dt, cfl_diffusive_ * h * h / model_.nu);
    return dt;
  }

 private:
  AdvectionDiffusionModel model_;
  BoundaryMode mode_;
  double tau_scale_;
  double cfl_;
  double cfl_diffusive_;
  BoundarySpec spec_;
  std::vector<double> buf_, d_;
};

struct MaterialParams {
  double gamma = 1.4;
  double mu = 1.9e-5;
  double kappa = 2.55e-2;
  double cv = 718.0;

  void validate() const {
    if (!(gamma > 1.0)) throw PhysicsError("gamma must exceed 1");
    if (!(mu > 0.0) || !(kappa > 0.0) || !(cv > 0.0)) throw PhysicsError("material parameters must be positive");
  }
};

/// Gaussian pressure pulse in a quiescent gas.
struct SedovSetup {
  double p_ambient = 101325.0;
  double t_ambient = 300.0;
  double overpressure = 2.0e6;
  double sigma = 1.0 / (10.0 * std::numbers::sqrt2);
  std::array<double, 2> centre{1.0, 1.0};

  double rho_ambient(const MaterialParams& m) const { return p_ambient / ((m.gamma - 1.0) * m.cv * t_ambient); }
};

/// Conserved variables rho, rho*u, rho*v, rho*E.
class NavierStokes : public System {
 public:
  NavierStokes(MaterialParams mat, SedovSetup setup, BoundaryMode mode, double tau_scale = 1.0, double cfl = 0.5,
               double cfl_diffusive = 0.2)
      : mat_(mat), setup_(setup), mode_(mode), tau_scale_(tau_scale), cfl_(cfl), cfl_diffusive_(cfl_diffusive) {
    mat_.validate();
    spec_ = BoundarySpec::dirichlet([this](double x, double y, double, int v) {
      std::array<double, 4> s{};
      initial(x, y, s);
      return s[static_cast<std::size_t>(v)];
    });
  }

  NavierStokes(const NavierStokes&) = delete;
  NavierStokes& operator=(const NavierStokes&) = delete;

  const MaterialParams& material() const { return mat_; }
  const SedovSetup& setup() const { return setup_; }

  int num_vars() const override { return 4; }
  std::vector<std::string> var_names() const override { return {"rho", "rho_u", "rho_v", "rho_E"}; }

  void initial(double x, double y, std::span<double> out) const override {
    const double dx = x - setup_.centre[0];
    const double dy = y - setup_.centre[1];
    const double p = setup_.p_ambient +
                     setup_.overpressure * std::exp(-(dx * dx + dy * dy) / (2.0 * setup_.sigma * setup_.sigma));
    out[0] = setup_.rho_ambient(mat_);
    out[1] = 0.0;
    out[2] = 0.0;
    out[3] = p / (mat_.gamma - 1.0);
  }

  /// rho: ambient density; momentum: ambient density times ambient sound
  /// speed; energy: peak initial energy density.
  std::vector<double> scales() const override {
    const double rho = setup_.rho_ambient(mat_);
    const double c = std::sqrt(mat_.gamma * (mat_.gamma - 1.0) * mat_.cv * setup_.t_ambient);
    const double e_peak = (setup_.p_ambient + setup_.overpressure) / (mat_.gamma - 1.0);
    return {rho, rho * c, rho * c, e_peak};
  }

  void rhs(double t, const SparseField& grid, StencilPlan& plan, std::span<const double> u, std::span<double> dudt) override {
    const std::size_t n = grid.size();
    const auto rho = u.subspan(0, n);
    const auto m1 = u.subspan(n, n);
    const auto m2 = u.subspan(2 * n, n);
    const auto en = u.subspan(3 * n, n);
    vel_u_.resize(n);
    vel_v_.resize(n);
    temp_.resize(n);
    pres_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!(rho[i] > 0.0) || !std::isfinite(rho[i])) throw PhysicsError(location("nonpositive density", grid, i));
      vel_u_[i] = m1[i] / rho[i];
      vel_v_[i] = m2[i] / rho[i];
      const double e = en[i] / rho[i] - 0.5 * (vel_u_[i] * vel_u_[i] + vel_v_[i] * vel_v_[i]);
      if (!(e > 0.0) || !std::isfinite(e)) throw PhysicsError(location("nonpositive internal energy", grid, i));
      pres_[i] = (mat_.gamma - 1.0) * rho[i] * e;
      temp_[i] = e / mat_.cv;
    }
    auto grad = [&](std::span<const double> f, std::vector<double>& dx, std::vector<double>& dy) {
      plan.fill_into(f, buf_);
      dx.resize(n);
      dy.resize(n);
      plan.apply(0, 1, buf_, dx);
      plan.apply(1, 1, buf_, dy);
    };
    grad(vel_u_, ux_, uy_);
    grad(vel_v_, vx_, vy_);
    grad(temp_, tx_, ty_);

    fxx_.resize(n);
    fxy_.resize(n);
    fyy_.resize(n);
    gx_.resize(n);
    gy_.resize(n);
    const double mu = mat_.mu;
    for (std::size_t i = 0; i < n; ++i) {
      const double div = ux_[i] + vy_[i];
      const double sxx = -pres_[i] + mu * (2.0 * ux_[i] - (2.0 / 3.0) * div);
      const double syy = -pres_[i] + mu * (2.0 * vy_[i] - (2.0 / 3.0) * div);
      const double sxy = mu * (uy_[i] + vx_[i]);
      const double uu = vel_u_[i], vv = vel_v_[i];
      fxx_[i] = m1[i] * uu - sxx;
      fxy_[i] = m1[i] * vv - sxy;
      fyy_[i] = m2[i] * vv - syy;
      gx_[i] = en[i] * uu - (sxx * uu + sxy * vv) - mat_.kappa * tx_[i];
      gy_[i] = en[i] * vv - (sxy * uu + syy * vv) - mat_.kappa * ty_[i];
    }

    auto div_into = [&](std::span<const double> fx, std::span<const double> fy, std::span<double> out) {
      d_.resize(n);
      plan.fill_into(fx, buf_);
      plan.apply(0, 1, buf_, d_);
      for (std::size_t i = 0; i < n; ++i) out[i] = -d_[i];
      plan.fill_into(fy, buf_);
      plan.apply(1, 1, buf_, d_);
      for (std::size_t i = 0; i < n; ++i) out[i] -= d_[i];
    };
    div_into(m1, m2, dudt.subspan(0, n));
    div_into(fxx_, fxy_, dudt.subspan(n, n));
    div_into(fxy_, fyy_, dudt.subspan(2 * n, n));
    div_into(gx_, gy_, dudt.subspan(3 * n, n));

    if (mode_ == BoundaryMode::kPenalty) {
      const auto bnd = boundary_points(grid);
      apply_penalty(grid, bnd, spec_, t, tau_scale_, 4, u, dudt, [](int, std::size_t, int) { return 0.0; });
    }
  }

  void apply_boundary(double t, const SparseField& grid, std::span<double> u) override {
    if (mode_ != BoundaryMode::kInject) return;
    apply_dirichlet(grid, boundary_points(grid), spec_, t, 4, u);
  }

  double stable_dt(const SparseField& grid, std::span<const double> u) const override {
    const std::size_t n = grid.size();
    const double h = finest_spacing(grid);
    double wave = 0.0, rho_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double rho = u[i];
      const double uu = u[n + i] / rho, vv = u[2 * n + i] / rho;
      const double e = u[3 * n + i] / rho - 0.5 * (uu * uu + vv * vv);
      const double c = std::sqrt(std::max(0.0, mat_.gamma * (mat_.gamma - 1.0) * e));
      wave = std::max(wave, std::hypot(uu, vv) + c);
      rho_min = std::min(rho_min, rho);
    }
    double dt = std::numeric_limits<double>::infinity();
    if (wave > 0.0) dt = cfl_ * h / wave;
    const double diff = std::max(mat_.mu * 4.0 / 3.0, mat_.gamma * mat_.kappa / mat_.cv) / rho_min;
    if (diff > 0.0) dt = std::min(dt, cfl_diffusive_ * h * h / diff);
    return dt;
  }

  /// Local sound speed of a conserved state.
  double sound_speed(double rho, double m1, double m2, double en) const {
    const double e = en / rho - 0.5 * (m1 * m1 + m2 * m2) / (rho * rho);
    return std::sqrt(mat_.gamma * (mat_.gamma - 1.0) * e);
  }

 private:
  static std::string location(const std::string& what, const SparseField& g, std::size_t i) {
    const auto p = g.position(i);
    return what + " at (" + format_double(p[0]) + ", " + format_double(p[1]) + ")";
  }

  MaterialParams mat_;
  SedovSetup setup_;
  BoundaryMode mode_;
  double tau_scale_;
  double cfl_;
  double cfl_diffusive_;
  BoundarySpec spec_;
  std::vector<double> vel_u_, vel_v_, temp_, pres_;
  std::vector<double> ux_, uy_, vx_, vy_, tx_, ty_;
  std::vector<double> fxx_, fxy_, fyy_, gx_, gy_;
  std::vector<double> buf_, d_;
};

}  // namespace awcm
