#pragma once

// Predictor-corrector grid adaptation around an embedded Runge-Kutta step.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "awcm/derivative.hpp"
#include "awcm/filters.hpp"
#include "awcm/physics.hpp"
#include "awcm/sparse_grid.hpp"
#include "awcm/time_integrator.hpp"

namespace awcm {

class AdaptivityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// What happens when a zone would need a level above j_cap.
enum class CapPolicy { kError, kSaturate };

struct AdaptSettings {
  double eps = 1e-3;
  std::vector<double> scales;  // per variable; empty means 1
  int zone_width = 1;
  int retry_budget = 5;
  int prune_every = 1;
  int start_level = 2;
  CapPolicy cap_policy = CapPolicy::kError;
};

namespace detail {

/// Zone of `idx` with the cap policy applied. Returns true if the cap was hit.
inline bool zone_with_policy(const DyadicIndex& idx, const GridGeometry& g, const AdaptSettings& s,
                             std::vector<DyadicIndex>& out) {
  bool capped = false;
  append_zone(idx, g, s.zone_width, out, &capped);
  if (capped && s.cap_policy == CapPolicy::kError) {
    throw RefinementLimitError("refinement beyond j_max_cap=" + std::to_string(g.j_cap) + " needed at j=" +
                               std::to_string(idx.level) + " k=(" + std::to_string(idx.k1) + "," +
                               std::to_string(idx.k2) + ")");
  }
  return capped;
}

}  // namespace detail

/// Grid augmented with the prediction zones of every significant entry.
inline SparseField predict(const SparseField& field, const AdaptSettings& s, const FilterBank& fb,
                           std::size_t* capped = nullptr) {
  std::vector<DyadicIndex> add;
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (!is_significant(field, i, s.eps, s.scales)) continue;
    if (detail::zone_with_policy(field.index(i), field.geometry(), s, add) && capped != nullptr) ++*capped;
  }
  std::erase_if(add, [&](const DyadicIndex& d) { return field.find(d) != npos; });
  SparseField out = merge(field, add, fb);
  refresh_flags(out, s.eps, s.scales);
  return out;
}

/// Significant entries of a trial field whose prediction zone is not fully
/// present: they sit on the outer shell of the predicted region or on its
/// finest level.
inline std::vector<DyadicIndex> check_significance(const SparseField& trial, const AdaptSettings& s) {
  std::vector<DyadicIndex> out;
  std::vector<DyadicIndex> zone;
  for (std::size_t i = 0; i < trial.size(); ++i) {
    if (!is_significant(trial, i, s.eps, s.scales)) continue;
    zone.clear();
    detail::zone_with_policy(trial.index(i), trial.geometry(), s, zone);
    for (const auto& z : zone) {
      if (trial.find(z) == npos) {
        out.push_back(trial.index(i));
        break;
      }
    }
  }
  return out;
}

/// Adaptive grid for an analytic field: start dense at start_level, add
/// zones of significant entries until every zone is present, then prune.
inline SparseField adapt_to_function(const GridGeometry& g, int num_vars,
                                     const std::function<void(double, double, std::span<double>)>& f,
                                     const AdaptSettings& s, const FilterBank& fb) {
  const int start = std::min(std::max(s.start_level, 0), g.j_cap);
  std::vector<DyadicIndex> ids;
  const int n = g.extent(start);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) ids.push_back(canonical_index(start, x, y));
  std::vector<double> buf(static_cast<std::size_t>(num_vars));
  for (int iter = 0;; ++iter) {
    if (iter > 4 * (g.j_cap + 2) + 8) throw AdaptivityError("initial grid adaptation did not converge");
    SparseField field = SparseField::from_indices(g, num_vars, close_index_set(std::move(ids), g, fb));
    for (std::size_t i = 0; i < field.size(); ++i) {
      const auto p = field.position(i);
      f(p[0], p[1], buf);
      for (int v = 0; v < num_vars; ++v) field.values(v)[i] = buf[static_cast<std::size_t>(v)];
    }
    forward_sparse(field, fb);
    const auto missing = check_significance(field, s);
    if (missing.empty()) return prune(field, s.eps, s.scales, s.zone_width, fb);
    ids = field.indices();
    for (const auto& m : missing) detail::zone_with_policy(m, g, s, ids);
  }
}

struct StepReport {
  long step = 0;
  double t = 0.0;
  double dt = 0.0;
  int retries = 0;
  int rejections = 0;
  std::size_t points = 0;
  int levels = 0;
  double error_estimate = 0.0;
};

/// Called once per accepted step with the predicted grid carrying the
/// step-n state and the accepted trial (coefficients current).
using StepObserver = std::function<void(const SparseField& predicted, const SparseField& trial, double t, double dt)>;

class AdaptiveSolver {
 public:
  AdaptiveSolver(System& system, FilterBank fb, GridGeometry geometry, AdaptSettings settings, TableauPair tableau,
                 StepController controller)
      : system_(system),
        fb_(std::move(fb)),
        ops_(OperatorSet::build(fb_)),
        geom_(geometry),
        settings_(std::move(settings)),
        tab_(std::move(tableau)),
        ctl_(controller) {
    if (settings_.scales.empty()) settings_.scales = system_.scales();
    if (static_cast<int>(settings_.scales.size()) != system_.num_vars())
      throw AdaptivityError("threshold scale count does not match the variable count");
    if (settings_.retry_budget < 0) throw AdaptivityError("retry budget must be non-negative");
  }

  /// Adapted initial condition at t = 0.
  void initialize() {
    field_ = adapt_to_function(
        geom_, system_.num_vars(), [this](double x, double y, std::span<double> out) { system_.initial(x, y, out); },
        settings_, fb_);
    t_ = 0.0;
    step_count_ = 0;
    if (!(ctl_.dt > 0.0)) {
      const auto u = flatten(field_);
      ctl_.dt = ctl_.clamp(system_.stable_dt(field_, u));
    }
  }

  void set_field(SparseField f, double t) {
    field_ = std::move(f);
    t_ = t;
  }

  const SparseField& field() const { return field_; }
  double time() const { return t_; }
  long steps() const { return step_count_; }
  const FilterBank& filters() const { return fb_; }
  const OperatorSet& operators() const { return ops_; }
  const AdaptSettings& settings() const { return settings_; }
  const StepController& controller() const { return ctl_; }
  const TableauPair& tableau() const { return tab_; }
  std::size_t capped_events() const { return capped_; }
  void set_observer(StepObserver obs) { observer_ = std::move(obs); }

  /// One accepted step, never past t_limit.
  StepReport step(double t_limit) {
    if (!(t_limit > t_)) throw AdaptivityError("step requested at or beyond the end time");
    StepReport rep;
    SparseField base = field_;
    for (int attempt = 0;; ++attempt) {
      SparseField predicted = predict(base, settings_, fb_, &capped_);
      StencilPlan& plan = plan_for(predicted);
      std::vector<double> u = flatten(predicted);
      system_.apply_boundary(t_, predicted, u);
      const auto weights = error_weights(predicted.size());

      ctl_.dt_ceiling = system_.stable_dt(predicted, u);
      if (ctl_.dt > ctl_.dt_ceiling) ctl_.dt = ctl_.dt_ceiling;
      StepResult res;
      for (int tries = 0;; ++tries) {
        if (tries > 200) throw AdaptivityError("time step rejected repeatedly at t=" + format_double(t_));
        const double planned = ctl_.dt;
        const bool clipped = t_ + ctl_.dt > t_limit;
        if (clipped) ctl_.dt = t_limit - t_;
        res = rk_step(
            t_, u,
            [&](double t, std::span<const double> s, std::span<double> d) { system_.rhs(t, predicted, plan, s, d); },
            tab_, ctl_, weights, [&](double t, std::span<double> s) { system_.apply_boundary(t, predicted, s); });
        if (res.accepted) {
          if (clipped) ctl_.dt = std::max(ctl_.dt, std::min(planned, ctl_.dt_ceiling));
          break;
        }
        ++rep.rejections;
      }

      SparseField trial = predicted;
      unflatten(res.trial, trial);
      forward_sparse(trial, fb_);
      const auto violators = check_significance(trial, settings_);
      if (violators.empty()) {
        if (observer_) observer_(predicted, trial, t_, res.dt_used);
        t_ = (t_limit - (t_ + res.dt_used) <= 1e-14 * std::max(1.0, std::abs(t_limit))) ? t_limit : t_ + res.dt_used;
        ++step_count_;
        refresh_flags(trial, settings_.eps, settings_.scales);
        if (settings_.prune_every > 0 && step_count_ % settings_.prune_every == 0)
          field_ = prune(trial, settings_.eps, settings_.scales, settings_.zone_width, fb_);
        else
          field_ = std::move(trial);
        rep.step = step_count_;
        rep.t = t_;
        rep.dt = res.dt_used;
        rep.retries = attempt;
        rep.points = field_.size();
        rep.levels = field_.finest_level();
        rep.error_estimate = res.error_estimate;
        return rep;
      }
      if (attempt >= settings_.retry_budget) {
        const auto& v = violators.front();
        throw AdaptivityError("retry budget exhausted at t=" + format_double(t_) + ": " +
                              std::to_string(violators.size()) + " significant coefficients outside the predicted zone, first j=" +
                              std::to_string(v.level) + " lambda=" + std::to_string(v.lambda) + " k=(" +
                              std::to_string(v.k1) + "," + std::to_string(v.k2) + ")");
      }
      // Discard the trial; supplement the step-n grid and repeat.
      std::vector<DyadicIndex> add(violators.begin(), violators.end());
      for (const auto& v : violators) detail::zone_with_policy(v, geom_, settings_, add);
      std::erase_if(add, [&](const DyadicIndex& d) { return base.find(d) != npos; });
      base = merge(base, add, fb_);
      ctl_.dt = res.dt_used;
    }
  }

  std::vector<double> flatten(const SparseField& f) const {
    std::vector<double> u(static_cast<std::size_t>(f.num_vars()) * f.size());
    for (int v = 0; v < f.num_vars(); ++v)
      std::copy(f.values(v).begin(), f.values(v).end(), u.begin() + static_cast<std::ptrdiff_t>(v * f.size()));
    return u;
  }

  static void unflatten(std::span<const double> u, SparseField& f) {
    for (int v = 0; v < f.num_vars(); ++v) {
      auto dst = f.values(v);
      std::copy_n(u.begin() + static_cast<std::ptrdiff_t>(v * f.size()), f.size(), dst.begin());
    }
  }

  /// Plan for a grid, reused while the index set is unchanged.
  StencilPlan& plan_for(const SparseField& f) {
    if (!plan_ || plan_indices_ != f.indices()) {
      plan_.emplace(f, fb_, ops_);
      plan_indices_ = f.indices();
    }
    return *plan_;
  }

 private:
  std::vector<double> error_weights(std::size_t n) const {
    std::vector<double> w(static_cast<std::size_t>(system_.num_vars()) * n);
    for (int v = 0; v < system_.num_vars(); ++v)
      std::fill_n(w.begin() + static_cast<std::ptrdiff_t>(v * n), n, 1.0 / settings_.scales[static_cast<std::size_t>(v)]);
    return w;
  }

  System& system_;
  FilterBank fb_;
  OperatorSet ops_;
  GridGeometry geom_;
  AdaptSettings settings_;
  TableauPair tab_;
  StepController ctl_;
  SparseField field_;
  double t_ = 0.0;
  long step_count_ = 0;
  std::size_t capped_ = 0;
  std::optional<StencilPlan> plan_;
  std::vector<DyadicIndex> plan_indices_;
  StepObserver observer_;
};

}  // namespace awcm
