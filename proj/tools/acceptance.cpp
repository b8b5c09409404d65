// Acceptance checks AC-1..AC-7. One PASS/FAIL line per criterion.
//
//   awcm_acceptance [--only AC-n]... [--full-report <report.txt>] [--strict]
//
// Exit status is 0 once every requested criterion has been evaluated, so a
// FAIL line does not break the test run; --strict turns any FAIL into exit 1.
//
// AC-6(d) needs the full-resolution Sedov run (about 16 min on one core). It is
// evaluated from a report.txt written by `awcm run configs/sedov.json` when
// --full-report is given and reported as SKIP otherwise.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "awcm/driver.hpp"

using namespace awcm;

namespace {

struct Outcome {
  enum Kind { kPass, kFail, kSkip } kind = kPass;
  std::string detail;
};

std::string fmt(double x, int prec = 3) {
  std::ostringstream os;
  os << std::setprecision(prec) << x;
  return os.str();
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const auto s = loglog_slope(x, y);
  return s ? *s : std::nan("");
}

bool within(double x, double target, double tol) { return std::abs(x - target) <= tol; }

Array2D sample(int n0, int level, const std::function<double(double, double)>& f) {
  const int n = dense_extent(n0, level);
  const double h = 1.0 / (n - 1);
  Array2D a(n, n);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) a(ix, iy) = f(ix * h, iy * h);
  return a;
}

double max_abs_diff(const Array2D& a, const Array2D& b) {
  double e = 0.0;
  for (int iy = 0; iy < a.ny(); ++iy)
    for (int ix = 0; ix < a.nx(); ++ix) e = std::max(e, std::abs(a(ix, iy) - b(ix, iy)));
  return e;
}

// AC-1: perfect reconstruction.
Outcome ac1() {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int p : {2, 4, 6, 8}) {
    const auto fb = build_filter_bank(p);
    for (int trial = 0; trial < 3; ++trial) {
      const int n = dense_extent(8, 5);
      Array2D f(n, n);
      double scale = 0.0;
      for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix) {
          f(ix, iy) = u(rng);
          scale = std::max(scale, std::abs(f(ix, iy)));
        }
      worst = std::max(worst, max_abs_diff(f, inverse(forward(f, 8, fb), fb)) / scale);
    }
  }
  return {worst < 1e-10 ? Outcome::kPass : Outcome::kFail, "max relative round-trip error " + fmt(worst) + " (< 1e-10)"};
}

// AC-2: thresholding error bound and its slope.
Outcome ac2() {
  const auto fb = build_filter_bank(6);
  const int n0 = 8, level = 6;
  const std::vector<double> eps = {1e-2, 1e-3, 1e-4, 1e-5};
  const std::vector<std::pair<std::string, std::function<double(double, double)>>> fields = {
      {"model", [](double x, double y) { return model_exact(x, y, 0.0, 0.01); }},
      {"gaussian", [](double x, double y) { return std::exp(-40.0 * ((x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5))); }}};
  bool ok = true;
  std::string detail;
  for (const auto& [name, f] : fields) {
    const Array2D dense = sample(n0, level, f);
    const CoefficientSet c = forward(dense, n0, fb);
    std::vector<double> errs;
    double worst_ratio = 0.0, min_compression = 1e300;
    for (double e : eps) {
      const CoefficientSet t = threshold(c, e);
      const double err = max_abs_diff(dense, inverse(t, fb));
      errs.push_back(err);
      worst_ratio = std::max(worst_ratio, err / e);
      min_compression = std::min(min_compression, static_cast<double>(dense.nx() * dense.ny()) /
                                                      static_cast<double>(count_retained(t)));
    }
    const double s = slope(eps, errs);
    const bool good = worst_ratio <= 10.0 && within(s, 1.0, 0.15) && min_compression >= 1.0;
    ok = ok && good;
    detail += name + ": max err/eps " + fmt(worst_ratio) + ", slope " + fmt(s) + ", min compression " +
              fmt(min_compression) + "; ";
  }
  return {ok ? Outcome::kPass : Outcome::kFail, detail + "(err <= 10 eps, slope 1 +- 0.15)"};
}

// AC-3: dense derivative sweeps. Truncating at level j corresponds to the
// threshold eps_j = max |detail at level j+1|.
Outcome ac3() {
  const int p = 6, n0 = 8;
  const auto fb = build_filter_bank(p);
  const auto f = [](double x, double y) { return std::sin(2.0 * x + 1.0) * std::cos(3.0 * y - 0.5); };
  const auto fx = [](double x, double y) { return 2.0 * std::cos(2.0 * x + 1.0) * std::cos(3.0 * y - 0.5); };
  const auto fxx = [](double x, double y) { return -4.0 * std::sin(2.0 * x + 1.0) * std::cos(3.0 * y - 0.5); };
  bool ok = true;
  std::string detail;
  for (int alpha : {1, 2}) {
    const auto op = build_diff_operator(fb, 0, alpha);
    std::vector<double> eps_j, errs;
    for (int j = 1; j <= 4; ++j) {
      const Array2D fine = sample(n0, j + 1, f);
      const CoefficientSet c = forward(fine, n0, fb);
      double e = 0.0;
      for (int iy = 0; iy < fine.ny(); ++iy)
        for (int ix = 0; ix < fine.nx(); ++ix)
          if (ix % 2 == 1 || iy % 2 == 1) e = std::max(e, std::abs(c.data()(ix, iy)));
      const Array2D coarse = sample(n0, j, f);
      const double h = 1.0 / (coarse.nx() - 1);
      const Array2D d = apply(op, coarse, h);
      const Array2D exact = sample(n0, j, alpha == 1 ? std::function<double(double, double)>(fx) : fxx);
      eps_j.push_back(e);
      errs.push_back(max_abs_diff(d, exact));
    }
    const double s = slope(eps_j, errs);
    const double target = 1.0 - static_cast<double>(alpha) / p;
    ok = ok && within(s, target, 0.2);
    detail += "alpha=" + std::to_string(alpha) + " slope " + fmt(s) + " (target " + fmt(target) + " +- 0.2)";
    if (alpha == 1) detail += "; ";
  }
  return {ok ? Outcome::kPass : Outcome::kFail, detail};
}

RunConfig model_config() {
  RunConfig c = parse_config(R"({"problem": "advection_diffusion", "n0": 16, "p": 6, "eps": 1e-3,
                                 "j_max_cap": 6, "t_end": 0.5, "integrator": "rk23",
                                 "model": {"velocity": [0, 1], "nu": 0.01}})");
  return c;
}

// AC-4: model problem at t=0.25 and the convergence sweep.
Outcome ac4() {
  RunConfig c = model_config();
  c.t_end = 0.25;
  RunOptions opt;
  opt.write_files = false;
  const auto rep = run(c, opt);
  if (!rep.ok) return {Outcome::kFail, "model run failed: " + rep.failure};
  const double err = *rep.outputs.back().max_error;
  bool ok = err <= 10.0 * c.eps;
  std::string detail = "error at t=0.25 " + fmt(err) + " (<= 1e-2)";

  // The verdict uses the default zone width; width 2 is reported for the
  // sensitivity check.
  const std::vector<double> eps = {3e-3, 1e-3, 3e-4, 1e-4};
  for (int width : {1, 2}) {
    RunConfig base = model_config();
    base.zone_width = width;
    const auto table = converge(base, eps, {6});
    for (const auto& r : table.rows)
      if (!r.ok) return {Outcome::kFail, detail + "; sweep run eps=" + fmt(r.eps) + " failed: " + r.failure};
    const auto& s = table.slopes.front();
    const double sf = s.field.value_or(std::nan("")), sd = s.derivative.value_or(std::nan(""));
    if (width == 1) {
      ok = ok && within(sf, 1.0, 0.15) && within(sd, 1.0 - 1.0 / 6.0, 0.2);
      detail += "; sweep eps 3e-3..1e-4 field slope " + fmt(sf) + " (1 +- 0.15), derivative slope " + fmt(sd) +
                " (0.833 +- 0.2)";
    } else {
      detail += "; zone width 2: field slope " + fmt(sf) + ", derivative slope " + fmt(sd) + " (informational)";
    }
  }
  return {ok ? Outcome::kPass : Outcome::kFail, detail};
}

// Keys of the significant detail entries of a sparse field (variable 0).
std::set<std::uint64_t> significant_keys(const SparseField& f, double eps) {
  std::set<std::uint64_t> out;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (is_significant(f, i, eps, {})) out.insert(detail::sort_key(f.index(i)));
  return out;
}

std::set<std::uint64_t> dense_significant_keys(const Array2D& values, int n0, int level, double eps, const FilterBank& fb) {
  const CoefficientSet c = forward(values, n0, fb);
  std::set<std::uint64_t> out;
  for (int iy = 0; iy < values.ny(); ++iy)
    for (int ix = 0; ix < values.nx(); ++ix) {
      const auto idx = canonical_index(level, ix, iy);
      if (idx.level > 0 && std::abs(c.data()(ix, iy)) >= eps) out.insert(detail::sort_key(idx));
    }
  return out;
}

struct OracleTally {
  long steps = 0;
  long mismatched = 0;  // accepted steps whose significant set differs from dense thresholding
  long missing = 0;     // dense-step coefficients >= 2 eps absent from the grid
  std::string failure;
};

OracleTally oracle_run(int zone_width) {
  RunConfig c = parse_config(R"({"problem": "advection_diffusion", "n0": 8, "p": 6, "eps": 1e-2,
                                 "j_max_cap": 4, "t_end": 0.5,
                                 "model": {"velocity": [0, 1], "nu": 0.01}})");
  c.zone_width = zone_width;
  const int cap = c.j_max_cap;
  auto sim = make_simulation(c);
  const FilterBank& fb = sim.solver->filters();

  // Dense reference system for the brute-force step.
  const GridGeometry g = sim.solver->field().geometry();
  std::vector<DyadicIndex> all;
  const int n = g.extent(cap);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) all.push_back(canonical_index(cap, x, y));
  const SparseField dense_grid = SparseField::from_indices(g, 1, all);
  StencilPlan dense_plan(dense_grid, fb, sim.solver->operators());
  auto dense_system = make_system(c);

  OracleTally tally;
  sim.solver->set_observer([&](const SparseField& predicted, const SparseField& trial, double t, double dt) {
    ++tally.steps;
    const Array2D trial_dense = to_dense(trial, 0, cap, fb);
    if (significant_keys(trial, c.eps) != dense_significant_keys(trial_dense, g.n0, cap, c.eps, fb)) ++tally.mismatched;

    // Dense step from the same step-n state with the same dt.
    const Array2D start = to_dense(predicted, 0, cap, fb);
    std::vector<double> u(dense_grid.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
      const auto p = lattice_position(dense_grid.index(i), cap);
      u[i] = start(p[0], p[1]);
    }
    dense_system->apply_boundary(t, dense_grid, u);
    StepController ctl;
    ctl.dt = dt;
    ctl.eps_target = 1e300;
    ctl.dt_max = 1e300;
    const auto res = rk_step(
        t, u, [&](double ts, std::span<const double> s, std::span<double> d) { dense_system->rhs(ts, dense_grid, dense_plan, s, d); },
        sim.solver->tableau(), ctl, {}, [&](double ts, std::span<double> s) { dense_system->apply_boundary(ts, dense_grid, s); });
    Array2D next(n, n);
    for (std::size_t i = 0; i < u.size(); ++i) {
      const auto p = lattice_position(dense_grid.index(i), cap);
      next(p[0], p[1]) = res.trial[i];
    }
    for (auto key : dense_significant_keys(next, g.n0, cap, 2.0 * c.eps, fb))
      if (trial.find(detail::from_sort_key(key)) == npos) ++tally.missing;
  });
  try {
    sim.solver->initialize();
    while (sim.solver->steps() < 20) sim.solver->step(c.t_end);
  } catch (const std::exception& e) {
    tally.failure = e.what();
  }
  return tally;
}

// AC-5: adaptivity oracle equivalence on a small instance.
Outcome ac5() {
  const OracleTally w1 = oracle_run(1);
  if (!w1.failure.empty()) return {Outcome::kFail, "run failed: " + w1.failure};
  const OracleTally w2 = oracle_run(2);
  const bool ok = w1.steps == 20 && w1.mismatched == 0;
  std::string detail = std::to_string(w1.steps) + " steps, " + std::to_string(w1.mismatched) +
                       " with a significant set differing from dense thresholding; dense-step coefficients >= 2 eps "
                       "absent from the grid: " + std::to_string(w1.missing) + " (informational)";
  detail += w2.failure.empty() ? "; zone width 2: " + std::to_string(w2.mismatched) + " differing, " +
                                     std::to_string(w2.missing) + " absent"
                               : "; zone width 2 run failed: " + w2.failure;
  return {ok ? Outcome::kPass : Outcome::kFail, detail};
}

std::map<std::string, std::string> read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

// AC-6: Sedov checks (a)-(c) at reduced resolution; (d) from a saved full run.
std::vector<std::pair<std::string, Outcome>> ac6(const std::string& full_report) {
  std::vector<std::pair<std::string, Outcome>> out;
  RunConfig c = parse_config(R"({"problem": "sedov", "j_max_cap": 5,
                                 "output": {"times": [25e-6, 50e-6, 75e-6, 100e-6]}})");
  RunOptions opt;
  opt.write_files = false;
  const auto rep = run(c, opt);
  if (!rep.ok) {
    out.push_back({"AC-6", {Outcome::kFail, "reduced run failed: " + rep.failure}});
    return out;
  }
  const auto& o0 = rep.outputs.front();
  const bool a = o0.detail_levels == 2 && std::abs(o0.finest_spacing - 0.03125) < 1e-12;
  out.push_back({"AC-6a", {a ? Outcome::kPass : Outcome::kFail,
                           "initial detail levels " + std::to_string(o0.detail_levels) + ", finest spacing " +
                               fmt(o0.finest_spacing * 1e3, 5) + " mm (2 levels, 31.25 mm)"}});
  double asym = 0.0, drift = 0.0;
  for (const auto& o : rep.outputs) {
    asym = std::max(asym, o.asymmetry.value_or(INFINITY));
    drift = std::max(drift, std::abs(*o.mass - *o0.mass) / *o0.mass);
  }
  out.push_back({"AC-6b", {asym < 1e-6 ? Outcome::kPass : Outcome::kFail,
                           "max relative density asymmetry " + fmt(asym) + " over " +
                               std::to_string(rep.outputs.size()) + " outputs (< 1e-6)"}});
  out.push_back({"AC-6c", {drift < 1e-3 ? Outcome::kPass : Outcome::kFail,
                           "max relative mass drift " + fmt(drift) + " (< 1e-3), j_max_cap 5, " +
                               std::to_string(rep.steps) + " steps"}});
  if (full_report.empty()) {
    out.push_back({"AC-6d", {Outcome::kSkip, "extended run not evaluated (pass --full-report <report.txt>)"}});
    return out;
  }
  try {
    auto kv = read_report(full_report);
    if (kv["status"] != "ok") {
      out.push_back({"AC-6d", {Outcome::kFail, "full run status " + kv["status"] + ": " + kv["failure"]}});
      return out;
    }
    const std::string last = "output." + std::to_string(std::stoi(kv["outputs"]) - 1) + ".";
    const double t = std::stod(kv[last + "t"]);
    const double h = std::stod(kv[last + "finest_spacing"]);
    const double points = std::stod(kv[last + "points"]);
    const double compression = std::stod(kv[last + "compression"]);
    const double speed = std::stod(kv[last + "max_speed"]);
    const bool d = std::abs(t - 133.902e-6) < 1e-12 && std::abs(h - 2.0 / (16 << 9)) < 1e-12 &&
                   points >= 312793.0 / 2 && points <= 312793.0 * 2 && compression > 100 &&
                   std::abs(speed - 568.0) <= 56.8;
    out.push_back({"AC-6d", {d ? Outcome::kPass : Outcome::kFail,
                             "saved full run: t " + fmt(t * 1e6, 6) + " us, finest spacing " + fmt(h * 1e3, 4) + " mm, points " +
                                 fmt(points, 7) + " (156397..625586), compression " + fmt(compression) +
                                 " (> 100), max speed " + fmt(speed, 4) + " m/s (568 +- 10%)"}});
  } catch (const std::exception& e) {
    out.push_back({"AC-6d", {Outcome::kFail, std::string("bad report: ") + e.what()}});
  }
  return out;
}

double fixed_step_error(const TableauPair& tab, int steps) {
  const auto rhs = [](double t, std::span<const double> u, std::span<double> d) { d[0] = -u[0] + std::sin(t); };
  std::vector<double> u{1.0};
  double t = 0.0;
  const double dt = 1.0 / steps;
  for (int s = 0; s < steps; ++s) {
    StepController ctl;
    ctl.dt = dt;
    ctl.eps_target = 1e300;
    ctl.dt_max = 1e300;
    u = rk_step(t, u, rhs, tab, ctl).trial;
    t += dt;
  }
  return std::abs(u[0] - (1.5 * std::exp(-1.0) + 0.5 * (std::sin(1.0) - std::cos(1.0))));
}

// AC-7: integrator orders and adaptive error control.
Outcome ac7() {
  std::vector<double> h, e23, e45;
  for (int n : {10, 20, 40, 80}) {
    h.push_back(1.0 / n);
    e23.push_back(fixed_step_error(TableauPair::rk23(), n));
    e45.push_back(fixed_step_error(TableauPair::rkf45(), n / 2));
  }
  const double s23 = slope(h, e23);
  std::vector<double> h45 = {0.2, 0.1, 0.05, 0.025};
  const double s45 = slope(h45, e45);

  const double eps = 1e-6;
  double worst = 0.0;
  long accepted = 0;
  for (const auto& tab : {TableauPair::rk23(), TableauPair::rkf45()}) {
    const auto rhs = [](double t, std::span<const double> u, std::span<double> d) {
      d[0] = u[1];
      d[1] = -u[0] + 0.1 * std::cos(t);
    };
    StepController ctl;
    ctl.eps_target = eps;
    ctl.dt = 0.1;
    std::vector<double> u{1.0, 0.0};
    double t = 0.0;
    while (t < 10.0) {
      ctl.dt = std::min(ctl.dt, 10.0 - t);
      const auto res = rk_step(t, u, rhs, tab, ctl);
      if (!res.accepted) continue;
      worst = std::max(worst, res.error_estimate);
      ++accepted;
      t += res.dt_used;
      u = res.trial;
    }
  }
  const bool ok = within(s23, 2.0, 0.2) && within(s45, 4.0, 0.3) && worst <= eps;
  return {ok ? Outcome::kPass : Outcome::kFail,
          "rk23 order " + fmt(s23) + " (2 +- 0.2), rkf45 order " + fmt(s45) + " (4 +- 0.3), max accepted error estimate " +
              fmt(worst) + " over " + std::to_string(accepted) + " steps (<= 1e-6)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"awcm acceptance checks"};
  std::vector<std::string> only;
  std::string full_report;
  bool strict = false;
  app.add_flag("--strict", strict, "exit 1 when any criterion fails");
  app.add_option("--only", only, "run only the named criteria (AC-1 .. AC-7)");
  app.add_option("--full-report", full_report, "report.txt of the full-resolution Sedov run for AC-6(d)");
  CLI11_PARSE(app, argc, argv);

  const auto wanted = [&](const std::string& id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
  int failures = 0;
  const auto print = [&](const std::string& id, const Outcome& o, double seconds) {
    const char* tag = o.kind == Outcome::kPass ? "PASS" : o.kind == Outcome::kFail ? "FAIL" : "SKIP";
    if (o.kind == Outcome::kFail) ++failures;
    std::cout << id << ' ' << tag << " [" << fmt(seconds) << " s] " << o.detail << std::endl;
  };
  const auto timed = [&](const std::string& id, const std::function<Outcome()>& f) {
    if (!wanted(id)) return;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {Outcome::kFail, std::string("exception: ") + e.what()};
    }
    print(id, o, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  };

  timed("AC-1", ac1);
  timed("AC-2", ac2);
  timed("AC-3", ac3);
  timed("AC-4", ac4);
  timed("AC-5", ac5);
  if (wanted("AC-6")) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto parts = ac6(full_report);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& [id, o] : parts) print(id, o, secs);
  }
  timed("AC-7", ac7);
  std::cout << (failures == 0 ? "acceptance: all evaluated criteria pass" : "acceptance: " + std::to_string(failures) + " failing")
            << std::endl;
  return strict && failures > 0 ? 1 : 0;
}
