#pragma once

// Configuration, simulation runs, convergence sweeps and report output.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "awcm/adaptivity.hpp"
#include "awcm/format.hpp"
#include "awcm/physics.hpp"
#include "awcm/sparse_grid.hpp"

namespace awcm {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ProblemId { kAdvectionDiffusion, kSedov };

struct OutputConfig {
  std::string dir;  // empty: no files
  std::vector<double> times;
  bool grids = true;
  bool fields = true;
};

struct RunConfig {
  ProblemId problem = ProblemId::kAdvectionDiffusion;
  std::array<double, 2> lo{0.0, 0.0};
  std::array<double, 2> hi{1.0, 1.0};
  int n0 = 8;
  int p = 6;
  double eps = 1e-3;
  int j_max_cap = 7;
  int start_level = 2;
  double t_end = 0.5;
  std::string integrator = "rk23";
  double dt_init = 0.0;  // 0: from the stability limit
  double dt_min = 1e-14;
  double dt_max = 1.0;
  double safety = 0.9;
  double time_tolerance = 1.0;  // step-error target as a multiple of eps
  double cfl = 0.5;
  double cfl_diffusive = 0.2;
  BoundaryMode bc_mode = BoundaryMode::kInject;
  double tau_scale = 1.0;
  int zone_width = 1;
  int retry_budget = 5;
  int prune_every = 1;
  CapPolicy cap_policy = CapPolicy::kError;
  std::vector<double> threshold_scales;
  AdvectionDiffusionModel model;
  MaterialParams material;
  SedovSetup sedov;
  OutputConfig output;
  long max_steps = 10'000'000;
};

namespace detail {

using nlohmann::json;

inline const json* member(const json& j, const char* key) {
  const auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

inline void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError(where + k + ": unknown field");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& prefix) {
  const json* m = member(j, key);
  if (m == nullptr) return;
  try {
    out = m->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(prefix + key + ": wrong type");
  }
}

inline void read_pair(const json& j, const char* key, std::array<double, 2>& out, const std::string& prefix) {
  const json* m = member(j, key);
  if (m == nullptr) return;
  if (!m->is_array() || m->size() != 2 || !(*m)[0].is_number() || !(*m)[1].is_number())
    throw ConfigError(prefix + key + ": expected two numbers");
  out = {(*m)[0].get<double>(), (*m)[1].get<double>()};
}

inline void require(bool cond, const std::string& field, const std::string& reason) {
  if (!cond) throw ConfigError(field + ": " + reason);
}

}  // namespace detail

/// Parses and validates a JSON configuration.
inline RunConfig parse_config(const std::string& text) {
  using detail::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: not valid JSON (") + e.what() + ")");
  }
  detail::check_keys(j, "",
                     {"problem", "domain", "n0", "p", "eps", "j_max_cap", "start_level", "t_end", "integrator", "dt_init",
                      "dt_min", "dt_max", "safety", "time_tolerance", "cfl", "cfl_diffusive", "bc_mode", "tau_scale",
                      "zone_width", "retry_budget", "prune_every", "cap_policy", "threshold_scales", "model", "material",
                      "sedov", "output", "max_steps"});
  RunConfig c;
  std::string problem = "advection_diffusion";
  detail::read(j, "problem", problem, "");
  if (problem == "advection_diffusion") {
    c.problem = ProblemId::kAdvectionDiffusion;
  } else if (problem == "sedov") {
    c.problem = ProblemId::kSedov;
    c.lo = {0.0, 0.0};
    c.hi = {2.0, 2.0};
    c.n0 = 16;
    c.p = 8;
    c.eps = 1e-2;
    c.j_max_cap = 9;
    c.t_end = 133.902e-6;
    c.integrator = "rkf45";
    c.cap_policy = CapPolicy::kSaturate;
  } else {
    throw ConfigError("problem: unsupported problem '" + problem + "'");
  }
  if (const json* d = detail::member(j, "domain")) {
    detail::check_keys(*d, "domain.", {"lo", "hi"});
    detail::read_pair(*d, "lo", c.lo, "domain.");
    detail::read_pair(*d, "hi", c.hi, "domain.");
  }
  detail::read(j, "n0", c.n0, "");
  detail::read(j, "p", c.p, "");
  detail::read(j, "eps", c.eps, "");
  detail::read(j, "j_max_cap", c.j_max_cap, "");
  detail::read(j, "start_level", c.start_level, "");
  detail::read(j, "t_end", c.t_end, "");
  detail::read(j, "integrator", c.integrator, "");
  detail::read(j, "dt_init", c.dt_init, "");
  detail::read(j, "dt_min", c.dt_min, "");
  detail::read(j, "dt_max", c.dt_max, "");
  detail::read(j, "safety", c.safety, "");
  detail::read(j, "time_tolerance", c.time_tolerance, "");
  detail::read(j, "cfl", c.cfl, "");
  detail::read(j, "cfl_diffusive", c.cfl_diffusive, "");
  std::string bc = "inject";
  detail::read(j, "bc_mode", bc, "");
  if (bc == "inject") c.bc_mode = BoundaryMode::kInject;
  else if (bc == "penalty") c.bc_mode = BoundaryMode::kPenalty;
  else throw ConfigError("bc_mode: expected inject or penalty");
  detail::read(j, "tau_scale", c.tau_scale, "");
  detail::read(j, "zone_width", c.zone_width, "");
  detail::read(j, "retry_budget", c.retry_budget, "");
  detail::read(j, "prune_every", c.prune_every, "");
  detail::read(j, "max_steps", c.max_steps, "");
  std::string cap = c.cap_policy == CapPolicy::kError ? "error" : "saturate";
  detail::read(j, "cap_policy", cap, "");
  if (cap == "error") c.cap_policy = CapPolicy::kError;
  else if (cap == "saturate") c.cap_policy = CapPolicy::kSaturate;
  else throw ConfigError("cap_policy: expected error or saturate");
  detail::read(j, "threshold_scales", c.threshold_scales, "");
  if (const json* m = detail::member(j, "model")) {
    detail::check_keys(*m, "model.", {"velocity", "nu"});
    detail::read_pair(*m, "velocity", c.model.velocity, "model.");
    detail::read(*m, "nu", c.model.nu, "model.");
  }
  if (const json* m = detail::member(j, "material")) {
    detail::check_keys(*m, "material.", {"gamma", "mu", "kappa", "cv"});
    detail::read(*m, "gamma", c.material.gamma, "material.");
    detail::read(*m, "mu", c.material.mu, "material.");
    detail::read(*m, "kappa", c.material.kappa, "material.");
    detail::read(*m, "cv", c.material.cv, "material.");
  }
  if (const json* m = detail::member(j, "sedov")) {
    detail::check_keys(*m, "sedov.", {"p_ambient", "t_ambient", "overpressure", "sigma", "centre"});
    detail::read(*m, "p_ambient", c.sedov.p_ambient, "sedov.");
    detail::read(*m, "t_ambient", c.sedov.t_ambient, "sedov.");
    detail::read(*m, "overpressure", c.sedov.overpressure, "sedov.");
    detail::read(*m, "sigma", c.sedov.sigma, "sedov.");
    detail::read_pair(*m, "centre", c.sedov.centre, "sedov.");
  }
  if (const json* m = detail::member(j, "output")) {
    detail::check_keys(*m, "output.", {"dir", "times", "grids", "fields"});
    detail::read(*m, "dir", c.output.dir, "output.");
    detail::read(*m, "times", c.output.times, "output.");
    detail::read(*m, "grids", c.output.grids, "output.");
    detail::read(*m, "fields", c.output.fields, "output.");
  }

  using detail::require;
  require(c.hi[0] > c.lo[0] && c.hi[1] > c.lo[1], "domain", "hi must exceed lo on both axes");
  require(c.n0 >= 1, "n0", "must be positive");
  require(c.p >= 2 && c.p <= 8 && c.p % 2 == 0, "p", "must be even and in 2..8");
  require(c.p > 2, "p", "order 2 has no second-derivative operator");
  require(c.n0 + 1 >= c.p, "n0", "too few base cells for order p");
  require(c.eps > 0.0, "eps", "must be positive");
  require(c.j_max_cap >= 0 && c.j_max_cap <= 14, "j_max_cap", "must be in 0..14");
  require(c.start_level >= 0, "start_level", "must be non-negative");
  require(c.t_end >= 0.0, "t_end", "must be non-negative");
  require(c.integrator == "rk23" || c.integrator == "rkf45", "integrator", "expected rk23 or rkf45");
  require(c.dt_init >= 0.0, "dt_init", "must be non-negative");
  require(c.dt_min > 0.0 && c.dt_max >= c.dt_min, "dt_min", "need 0 < dt_min <= dt_max");
  require(c.safety > 0.0 && c.safety <= 1.0, "safety", "must be in (0, 1]");
  require(c.time_tolerance > 0.0, "time_tolerance", "must be positive");
  require(c.cfl > 0.0 && c.cfl_diffusive > 0.0, "cfl", "must be positive");
  require(c.tau_scale > 0.0, "tau_scale", "must be positive");
  require(c.zone_width >= 1, "zone_width", "must be at least 1");
  require(c.retry_budget >= 0, "retry_budget", "must be non-negative");
  require(c.prune_every >= 0, "prune_every", "must be non-negative");
  require(c.model.nu >= 0.0, "model.nu", "must be non-negative");
  for (double t : c.output.times) require(t >= 0.0 && t <= c.t_end, "output.times", "must lie in [0, t_end]");
  const std::size_t nv = c.problem == ProblemId::kSedov ? 4 : 1;
  require(c.threshold_scales.empty() || c.threshold_scales.size() == nv, "threshold_scales",
          "expected one scale per variable");
  for (double s : c.threshold_scales) require(s > 0.0, "threshold_scales", "must be positive");
  try {
    c.material.validate();
  } catch (const PhysicsError& e) {
    throw ConfigError(std::string("material: ") + e.what());
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Closed-form solution of a problem. Only the advection-diffusion model has one.
inline double evaluate_exact(ProblemId problem, double x1, double x2, double t, double nu = 0.01) {
  if (problem != ProblemId::kAdvectionDiffusion) throw std::invalid_argument("no exact solution for this problem");
  return model_exact(x1, x2, t, nu);
}

/// du/dx1 of the model solution.
inline double model_exact_dx(double x1, double x2, double t, double nu) {
  const double a = x1 + 5.0 * nu;
  const double b = t - x2;
  const double r = a * a + b * b;
  return 5.0 * nu * (b * b - a * a) / (r * r);
}

// ---------------------------------------------------------------------------
// Reports

struct OutputRecord {
  double t = 0.0;
  std::size_t points = 0;
  int j_max_active = 0;
  double compression = 0.0;
  std::optional<double> max_error;       // at retained points
  std::optional<double> max_error_dense;  // over the dense reconstruction
  std::optional<double> max_dx_error;     // du/dx1 at retained points
  std::optional<double> mass;
  std::optional<double> max_speed;
  std::optional<double> asymmetry;
  int detail_levels = 0;
  double finest_spacing = 0.0;
};

struct ErrorReport {
  bool ok = true;
  std::string failure;
  std::string problem;
  int p = 0;
  double eps = 0.0;
  long steps = 0;
  long retries = 0;
  long rejections = 0;
  double t_final = 0.0;
  double wall_seconds = 0.0;
  double max_step_error = 0.0;
  double dt_min_used = 0.0;
  double dt_max_used = 0.0;
  std::size_t capped_events = 0;
  std::vector<OutputRecord> outputs;

  void write(std::ostream& os) const {
    os << "status=" << (ok ? "ok" : "failed") << '\n';
    if (!ok) os << "failure=" << failure << '\n';
    os << "problem=" << problem << '\n'
       << "p=" << p << '\n'
       << "eps=" << format_double(eps) << '\n'
       << "steps=" << steps << '\n'
       << "retries=" << retries << '\n'
       << "rejections=" << rejections << '\n'
       << "t_final=" << format_double(t_final) << '\n'
       << "max_step_error=" << format_double(max_step_error) << '\n'
       << "dt_min_used=" << format_double(dt_min_used) << '\n'
       << "dt_max_used=" << format_double(dt_max_used) << '\n'
       << "capped_events=" << capped_events << '\n'
       << "wall_seconds=" << format_double(wall_seconds) << '\n'
       << "outputs=" << outputs.size() << '\n';
    for (std::size_t k = 0; k < outputs.size(); ++k) {
      const auto& o = outputs[k];
      const std::string pre = "output." + std::to_string(k) + ".";
      os << pre << "t=" << format_double(o.t) << '\n'
         << pre << "points=" << o.points << '\n'
         << pre << "j_max_active=" << o.j_max_active << '\n'
         << pre << "detail_levels=" << o.detail_levels << '\n'
         << pre << "finest_spacing=" << format_double(o.finest_spacing) << '\n'
         << pre << "compression=" << format_double(o.compression) << '\n';
      if (o.max_error) os << pre << "max_error=" << format_double(*o.max_error) << '\n';
      if (o.max_error_dense) os << pre << "max_error_dense=" << format_double(*o.max_error_dense) << '\n';
      if (o.max_dx_error) os << pre << "max_dx_error=" << format_double(*o.max_dx_error) << '\n';
      if (o.mass) os << pre << "mass=" << format_double(*o.mass) << '\n';
      if (o.max_speed) os << pre << "max_speed=" << format_double(*o.max_speed) << '\n';
      if (o.asymmetry) os << pre << "asymmetry=" << format_double(*o.asymmetry) << '\n';
    }
  }
};

/// CSV with header `x,y,j,lambda,<var>...`.
inline void write_field_csv(const SparseField& f, const std::vector<std::string>& names, std::ostream& os) {
  os << "x,y,j,lambda";
  for (const auto& n : names) os << ',' << n;
  os << '\n';
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto p = f.position(i);
    os << format_double(p[0]) << ',' << format_double(p[1]) << ',' << f.index(i).level << ',' << f.index(i).lambda;
    for (int v = 0; v < f.num_vars(); ++v) os << ',' << format_double(f.values(v)[i]);
    os << '\n';
  }
}

/// Largest relative difference of a variable between mirrored points under
/// reflections about the domain centre lines. Infinite if the grid itself
/// is not mirror-symmetric.
inline double mirror_asymmetry(const SparseField& f, int var) {
  double scale = 0.0;
  for (double v : f.values(var)) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) scale = 1.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto& idx = f.index(i);
    const int last = f.geometry().extent(idx.level) - 1;
    const std::array<std::array<int, 2>, 3> images{{{last - idx.k1, idx.k2}, {idx.k1, last - idx.k2}, {last - idx.k1, last - idx.k2}}};
    for (const auto& m : images) {
      const std::size_t k = f.find_lattice(idx.level, m[0], m[1]);
      if (k == npos) return std::numeric_limits<double>::infinity();
      worst = std::max(worst, std::abs(f.values(var)[i] - f.values(var)[k]) / scale);
    }
  }
  return worst;
}

inline int detail_levels(const SparseField& f) {
  int top = 0;
  for (const auto& idx : f.indices()) top = std::max(top, idx.level);
  return top;
}

struct Simulation {
  RunConfig config;
  std::unique_ptr<System> system;
  std::unique_ptr<AdaptiveSolver> solver;
};

inline std::unique_ptr<System> make_system(const RunConfig& c) {
  if (c.problem == ProblemId::kAdvectionDiffusion)
    return std::make_unique<AdvectionDiffusion>(c.model, c.bc_mode, c.tau_scale, c.cfl, c.cfl_diffusive);
  return std::make_unique<NavierStokes>(c.material, c.sedov, c.bc_mode, c.tau_scale, c.cfl, c.cfl_diffusive);
}

inline Simulation make_simulation(const RunConfig& c) {
  Simulation s;
  s.config = c;
  s.system = make_system(c);
  GridGeometry g;
  g.n0 = c.n0;
  g.j_cap = c.j_max_cap;
  g.lo = c.lo;
  g.hi = c.hi;
  AdaptSettings a;
  a.eps = c.eps;
  a.scales = c.threshold_scales;
  a.zone_width = c.zone_width;
  a.retry_budget = c.retry_budget;
  a.prune_every = c.prune_every;
  a.start_level = c.start_level;
  a.cap_policy = c.cap_policy;
  StepController ctl;
  ctl.eps_target = c.eps * c.time_tolerance;
  ctl.dt = c.dt_init;
  ctl.dt_min = c.dt_min;
  ctl.dt_max = c.dt_max;
  ctl.safety = c.safety;
  s.solver = std::make_unique<AdaptiveSolver>(*s.system, build_filter_bank(c.p), g, a, TableauPair::by_name(c.integrator), ctl);
  return s;
}

/// Diagnostics of the current state.
inline OutputRecord measure(const Simulation& sim, bool dense_error = true) {
  const auto& c = sim.config;
  const auto& f = sim.solver->field();
  OutputRecord o;
  o.t = sim.solver->time();
  o.points = f.size();
  o.j_max_active = f.finest_level();
  o.detail_levels = detail_levels(f);
  o.finest_spacing = finest_spacing(f);
  const double dense = std::pow(static_cast<double>(f.geometry().extent(o.j_max_active)), 2);
  o.compression = dense / static_cast<double>(f.size());
  if (c.problem == ProblemId::kAdvectionDiffusion) {
    const double nu = c.model.nu;
    double err = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const auto p = f.position(i);
      err = std::max(err, std::abs(f.values(0)[i] - model_exact(p[0], p[1], o.t, nu)));
    }
    o.max_error = err;
    if (dense_error) {
      const auto d = to_dense(f, 0, o.j_max_active, sim.solver->filters());
      const int n = d.nx();
      double e2 = 0.0;
      for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix) {
          const double x = f.geometry().coordinate(0, o.j_max_active, ix);
          const double y = f.geometry().coordinate(1, o.j_max_active, iy);
          e2 = std::max(e2, std::abs(d(ix, iy) - model_exact(x, y, o.t, nu)));
        }
      o.max_error_dense = e2;
    }
    StencilPlan plan(f, sim.solver->filters(), sim.solver->operators());
    const auto dx = plan.derivative(0, 1, f.values(0));
    double ed = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const auto p = f.position(i);
      ed = std::max(ed, std::abs(dx[i] - model_exact_dx(p[0], p[1], o.t, nu)));
    }
    o.max_dx_error = ed;
  } else {
    o.mass = integrate(f, 0, sim.solver->filters());
    double vmax = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
      vmax = std::max(vmax, std::hypot(f.values(1)[i], f.values(2)[i]) / f.values(0)[i]);
    o.max_speed = vmax;
    o.asymmetry = mirror_asymmetry(f, 0);
  }
  return o;
}

struct RunOptions {
  bool write_files = true;
  bool dense_error = true;
  std::ostream* progress = nullptr;
  StepObserver observer;
  std::function<void(const SparseField&)> on_finish;  // final state, also on failure
};

/// Runs a configuration to t_end (or the last output time when outputs
/// stop earlier), emitting outputs at t=0 and each configured time.
inline ErrorReport run(const RunConfig& c, const RunOptions& opt = {}) {
  namespace fs = std::filesystem;
  const auto start = std::chrono::steady_clock::now();
  ErrorReport rep;
  rep.problem = c.problem == ProblemId::kSedov ? "sedov" : "advection_diffusion";
  rep.p = c.p;
  rep.eps = c.eps;
  const bool files = opt.write_files && !c.output.dir.empty();
  std::ofstream log;
  if (files) {
    fs::create_directories(c.output.dir);
    log.open(fs::path(c.output.dir) / "steps.log");
    log << "step n t dt retries points levels\n";
  }
  Simulation sim;
  std::vector<double> times = c.output.times;
  times.push_back(c.t_end);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  std::size_t out_index = 0;
  auto emit = [&]() {
    rep.outputs.push_back(measure(sim, opt.dense_error));
    if (files) {
      const std::string tag = std::to_string(out_index);
      if (c.output.grids) {
        std::ofstream g(fs::path(c.output.dir) / ("grid_" + tag + ".txt"));
        dump_grid(sim.solver->field(), g);
      }
      if (c.output.fields) {
        std::ofstream fcsv(fs::path(c.output.dir) / ("field_" + tag + ".csv"));
        write_field_csv(sim.solver->field(), sim.system->var_names(), fcsv);
      }
    }
    ++out_index;
  };
  try {
    sim = make_simulation(c);
    if (opt.observer) sim.solver->set_observer(opt.observer);
    sim.solver->initialize();
    emit();
    rep.dt_min_used = std::numeric_limits<double>::infinity();
    for (double target : times) {
      if (target <= 0.0) continue;
      while (sim.solver->time() < target) {
        if (sim.solver->steps() >= c.max_steps) throw AdaptivityError("step limit reached");
        const StepReport s = sim.solver->step(target);
        rep.steps = s.step;
        rep.retries += s.retries;
        rep.rejections += s.rejections;
        rep.max_step_error = std::max(rep.max_step_error, s.error_estimate);
        rep.dt_min_used = std::min(rep.dt_min_used, s.dt);
        rep.dt_max_used = std::max(rep.dt_max_used, s.dt);
        if (files) {
          log << "step " << s.step << ' ' << format_double(s.t) << ' ' << format_double(s.dt) << ' ' << s.retries << ' '
              << s.points << ' ' << s.levels << '\n';
        }
        if (opt.progress != nullptr && s.step % 100 == 0) {
          *opt.progress << "step " << s.step << " t=" << format_double(s.t) << " dt=" << format_double(s.dt)
                        << " points=" << s.points << " levels=" << s.levels << std::endl;
        }
      }
      emit();
    }
    if (rep.steps == 0) rep.dt_min_used = 0.0;
  } catch (const std::exception& e) {
    rep.ok = false;
    rep.failure = e.what();
    if (sim.solver) rep.failure += " (step " + std::to_string(sim.solver->steps()) + ", t=" + format_double(sim.solver->time()) + ")";
  }
  if (sim.solver) {
    if (opt.on_finish) opt.on_finish(sim.solver->field());
    rep.t_final = sim.solver->time();
    rep.capped_events = sim.solver->capped_events();
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (files) {
    std::ofstream r(fs::path(c.output.dir) / "report.txt");
    rep.write(r);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Convergence sweeps

/// Least-squares slope of log(y) against log(x); nullopt with fewer than two points.
inline std::optional<double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 2) return std::nullopt;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) return std::nullopt;
  return (n * sxy - sx * sy) / den;
}

struct ConvergenceRow {
  int p = 0;
  double eps = 0.0;
  double error = 0.0;
  double dx_error = 0.0;
  std::size_t points = 0;
  bool ok = true;
  std::string failure;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  struct Slopes {
    int p;
    std::optional<double> field;
    std::optional<double> derivative;
  };
  std::vector<Slopes> slopes;

  void write(std::ostream& os) const {
    os << "p,eps,error,dx_error,points,status\n";
    for (const auto& r : rows)
      os << r.p << ',' << format_double(r.eps) << ',' << format_double(r.error) << ',' << format_double(r.dx_error) << ','
         << r.points << ',' << (r.ok ? "ok" : "failed: " + r.failure) << '\n';
    for (const auto& s : slopes) {
      os << "slope p=" << s.p << " field=" << (s.field ? format_double(*s.field) : std::string("undefined"))
         << " derivative=" << (s.derivative ? format_double(*s.derivative) : std::string("undefined")) << '\n';
    }
  }
};

/// Solves the configured problem for every (p, eps) pair up to t_end/2 and
/// measures the error there.
inline ConvergenceTable converge(const RunConfig& base, const std::vector<double>& eps_list, const std::vector<int>& p_list,
                                 std::ostream* progress = nullptr) {
  if (base.problem != ProblemId::kAdvectionDiffusion) throw ConfigError("converge: problem has no exact solution");
  ConvergenceTable table;
  for (int p : p_list) {
    std::vector<double> xs, ys, ds;
    for (double eps : eps_list) {
      RunConfig c = base;
      c.p = p;
      c.eps = eps;
      if (c.n0 + 1 < p) throw ConfigError("converge: n0 too small for p=" + std::to_string(p));
      c.t_end = base.t_end / 2.0;
      c.output.times.clear();
      RunOptions opt;
      opt.write_files = false;
      opt.dense_error = false;
      const auto rep = run(c, opt);
      ConvergenceRow row;
      row.p = p;
      row.eps = eps;
      row.ok = rep.ok;
      row.failure = rep.failure;
      if (rep.ok && !rep.outputs.empty()) {
        const auto& o = rep.outputs.back();
        row.error = o.max_error.value_or(0.0);
        row.dx_error = o.max_dx_error.value_or(0.0);
        row.points = o.points;
        xs.push_back(eps);
        ys.push_back(row.error);
        ds.push_back(row.dx_error);
      }
      if (progress != nullptr)
        *progress << "p=" << p << " eps=" << format_double(eps) << " error=" << format_double(row.error)
                  << " dx_error=" << format_double(row.dx_error) << " points=" << row.points << std::endl;
      table.rows.push_back(row);
    }
    table.slopes.push_back({p, loglog_slope(xs, ys), loglog_slope(xs, ds)});
  }
  return table;
}

}  // namespace awcm
