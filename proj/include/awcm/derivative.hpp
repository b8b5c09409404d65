#pragma once

// Projected differentiation operators for the interpolating basis, applied
// matrix-free as level-wise stencil contractions in collocation space.

#include <array>
#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "awcm/filters.hpp"
#include "awcm/sparse_grid.hpp"
#include "awcm/transform.hpp"

namespace awcm {

class DerivativeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DiffOperator {
 public:
  int axis() const { return axis_; }
  int order() const { return alpha_; }
  int basis_order() const { return p_; }
  int radius() const { return radius_; }
  /// Boundary window width on long lines.
  int boundary_width() const { return width_; }

  /// Interior weights at offsets -radius..radius (unit spacing).
  const std::vector<double>& interior() const { return interior_; }
  /// Exact one-sided rows for nodes 0..radius-1 of a long line, over nodes 0..width-1.
  const std::vector<std::vector<Rational>>& boundary_rows() const { return boundary_exact_; }

  /// Taps (node indices on the line) for node i of a line with n nodes, unit spacing.
  std::vector<Tap> line_stencil(int i, int n) const {
    if (n < alpha_ + 1) throw DerivativeError("line of " + std::to_string(n) + " nodes too short for derivative");
    if (i < 0 || i >= n) throw DerivativeError("stencil reaches outside domain: node " + std::to_string(i));
    if (n < special_limit_) return small_lines_.at(n)[static_cast<std::size_t>(i)];
    std::vector<Tap> taps;
    const int right = n - 1 - i;
    if (i >= radius_ && right >= radius_) {
      for (int k = 1; k <= radius_; ++k)
        taps.push_back({i + k, i - k, interior_[static_cast<std::size_t>(radius_ + k)], interior_[static_cast<std::size_t>(radius_ - k)]});
      return taps;
    }
    const double sign = (alpha_ % 2 == 1) ? -1.0 : 1.0;
    if (i < radius_) {
      const auto& row = boundary_float_[static_cast<std::size_t>(i)];
      for (int m = 0; m < width_; ++m) taps.push_back({m, m, row[static_cast<std::size_t>(m)], 0.0});
    } else {
      const auto& row = boundary_float_[static_cast<std::size_t>(right)];
      for (int m = 0; m < width_; ++m) taps.push_back({n - 1 - m, n - 1 - m, sign * row[static_cast<std::size_t>(m)], 0.0});
    }
    return taps;
  }

  friend DiffOperator build_diff_operator(const FilterBank& fb, int axis, int alpha);

 private:
  static std::vector<Tap> window_row(int i, int n, int width, int alpha) {
    // Left window for the left half, mirrored window for the right half,
    // whole line for an exact centre.
    const int right = n - 1 - i;
    std::vector<Rational> nodes;
    std::vector<Tap> taps;
    if (i == right) {
      for (int m = 0; m < n; ++m) nodes.emplace_back(m);
      const auto w = lagrange_derivative_weights(nodes, Rational(i), alpha);
      for (int m = 0; 2 * m < n - 1; ++m)
        taps.push_back({m, n - 1 - m, to_double(w[static_cast<std::size_t>(m)]), to_double(w[static_cast<std::size_t>(n - 1 - m)])});
      taps.push_back({i, i, to_double(w[static_cast<std::size_t>(i)]), 0.0});
      return taps;
    }
    const int w_n = std::min(width, n);
    for (int m = 0; m < w_n; ++m) nodes.emplace_back(m);
    const bool left = i < right;
    const auto w = lagrange_derivative_weights(nodes, Rational(left ? i : right), alpha);
    const double sign = (!left && alpha % 2 == 1) ? -1.0 : 1.0;
    for (int m = 0; m < w_n; ++m) {
      const int node = left ? m : n - 1 - m;
      taps.push_back({node, node, sign * to_double(w[static_cast<std::size_t>(m)]), 0.0});
    }
    return taps;
  }

  int axis_ = 0;
  int alpha_ = 1;
  int p_ = 0;
  int radius_ = 0;
  int width_ = 0;
  int special_limit_ = 0;
  std::vector<double> interior_;
  std::vector<std::vector<Rational>> boundary_exact_;
  std::vector<std::vector<double>> boundary_float_;
  std::map<int, std::vector<std::vector<Tap>>> small_lines_;
};

/// Values of the alpha-th derivative of the scaling function at the integers
/// -(p-1)..p-1, from the refinement eigenproblem v = 2^alpha M v with
/// M[n][m] = h[2n-m], normalised by exactness on x^alpha.
inline std::vector<double> scaling_derivative_values(const FilterBank& fb, int alpha) {
  const int p = fb.order();
  const int r = p - 1;
  const int size = 2 * r + 1;
  const auto h = [&](int k) {
    const auto it = fb.h().find(k);
    return it == fb.h().end() ? 0.0 : to_double(it->second);
  };
  // Rows: eigen equations, moment conditions on w_n = v_{-n}, parity.
  const int rows = size + p + size;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, size);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
  const double scale = std::ldexp(1.0, alpha);
  for (int n = -r; n <= r; ++n) {
    for (int m = -r; m <= r; ++m) a(n + r, m + r) = scale * h(2 * n - m);
    a(n + r, n + r) -= 1.0;
  }
  double factorial = 1.0;
  for (int q = 2; q <= alpha; ++q) factorial *= q;
  for (int q = 0; q < p; ++q) {
    for (int n = -r; n <= r; ++n) a(size + q, -n + r) = std::pow(static_cast<double>(n), q);
    b(size + q) = q == alpha ? factorial : 0.0;
  }
  const double parity = alpha % 2 == 1 ? -1.0 : 1.0;
  for (int n = -r; n <= r; ++n) {
    a(size + p + n + r, n + r) += 1.0;
    a(size + p + n + r, -n + r) -= parity;
  }
  const Eigen::VectorXd v = a.completeOrthogonalDecomposition().solve(b);
  if ((a * v - b).norm() > 1e-9 * (1.0 + b.norm()) || !v.allFinite())
    throw DerivativeError("eigensolve failure for order " + std::to_string(p) + ", alpha " + std::to_string(alpha));
  return std::vector<double>(v.data(), v.data() + v.size());
}

/// Differentiation operator of order alpha along axis for the basis of fb.
inline DiffOperator build_diff_operator(const FilterBank& fb, int axis, int alpha) {
  if (alpha < 1 || alpha > 2) throw DerivativeError("derivative order must be 1 or 2");
  if (alpha >= fb.order())
    throw DerivativeError("insufficient regularity: alpha=" + std::to_string(alpha) + " needs basis order > alpha");
  if (axis < 0 || axis > 1) throw DerivativeError("axis must be 0 or 1");

  DiffOperator op;
  op.axis_ = axis;
  op.alpha_ = alpha;
  op.p_ = fb.order();
  int r = fb.order() - 1;
  std::vector<double> w(static_cast<std::size_t>(2 * r + 1));
  try {
    const auto v = scaling_derivative_values(fb, alpha);
    for (int n = -r; n <= r; ++n) w[static_cast<std::size_t>(n + r)] = v[static_cast<std::size_t>(-n + r)];
  } catch (const DerivativeError&) {
    // Defective eigenvalue 1/4 (p=4): the scaling function has no second
    // derivative at the integers. Use the first-derivative stencil twice.
    if (alpha != 2) throw;
    const auto v = scaling_derivative_values(fb, 1);
    std::vector<double> w1(v.size());
    for (int n = -r; n <= r; ++n) w1[static_cast<std::size_t>(n + r)] = v[static_cast<std::size_t>(-n + r)];
    w.assign(static_cast<std::size_t>(4 * r + 1), 0.0);
    for (int a = -r; a <= r; ++a)
      for (int b = -r; b <= r; ++b)
        w[static_cast<std::size_t>(a + b + 2 * r)] += w1[static_cast<std::size_t>(a + r)] * w1[static_cast<std::size_t>(b + r)];
    r *= 2;
  }
  // Exact (anti)symmetry; drop round-off tails.
  const double parity = alpha % 2 == 1 ? -1.0 : 1.0;
  for (int n = 0; n <= r; ++n) {
    double x = 0.5 * (w[static_cast<std::size_t>(r + n)] + parity * w[static_cast<std::size_t>(r - n)]);
    if (std::abs(x) < 1e-13) x = 0.0;
    w[static_cast<std::size_t>(r + n)] = x;
    w[static_cast<std::size_t>(r - n)] = parity * x;
  }
  int radius = 0;
  for (int n = 1; n <= r; ++n)
    if (w[static_cast<std::size_t>(n + r)] != 0.0 || w[static_cast<std::size_t>(-n + r)] != 0.0) radius = n;
  op.radius_ = radius;
  op.interior_.assign(w.begin() + (r - radius), w.begin() + (r + radius + 1));

  op.width_ = fb.order() + alpha;
  std::vector<Rational> nodes;
  for (int m = 0; m < op.width_; ++m) nodes.emplace_back(m);
  for (int i = 0; i < radius; ++i) {
    op.boundary_exact_.push_back(lagrange_derivative_weights(nodes, Rational(i), alpha));
    std::vector<double> row;
    for (const auto& x : op.boundary_exact_.back()) row.push_back(to_double(x));
    op.boundary_float_.push_back(std::move(row));
  }
  op.special_limit_ = std::max(2 * radius + 1, op.width_);
  for (int n = alpha + 1; n < op.special_limit_; ++n) {
    auto& rows = op.small_lines_[n];
    for (int i = 0; i < n; ++i) rows.push_back(DiffOperator::window_row(i, n, op.width_, alpha));
  }
  return op;
}

/// Contraction of a tap list against differences f(node) - f(centre).
/// Derivative weights sum to zero, so this is the same operator, but it
/// annihilates constants exactly.
template <class At>
double contract(const std::vector<Tap>& taps, At&& at, double centre) {
  double acc = 0.0;
  for (const Tap& t : taps) acc += t.weight_a * (at(t.a) - centre) + t.weight_b * (at(t.b) - centre);
  return acc;
}

/// Derivative of a dense level-j field along the operator's axis.
/// `spacing` is the physical distance between adjacent samples on that axis.
inline Array2D apply(const DiffOperator& op, const Array2D& f, double spacing) {
  Array2D out(f.nx(), f.ny());
  const double scale = 1.0 / std::pow(spacing, op.order());
  if (op.axis() == 0) {
    const int n = f.nx();
    std::vector<std::vector<Tap>> rows;
    for (int i = 0; i < n; ++i) rows.push_back(op.line_stencil(i, n));
    for (int iy = 0; iy < f.ny(); ++iy)
      for (int ix = 0; ix < n; ++ix)
        out(ix, iy) = scale * contract(rows[static_cast<std::size_t>(ix)], [&](int k) { return f(k, iy); }, f(ix, iy));
  } else {
    const int n = f.ny();
    std::vector<std::vector<Tap>> rows;
    for (int i = 0; i < n; ++i) rows.push_back(op.line_stencil(i, n));
    for (int iy = 0; iy < n; ++iy)
      for (int ix = 0; ix < f.nx(); ++ix)
        out(ix, iy) = scale * contract(rows[static_cast<std::size_t>(iy)], [&](int k) { return f(ix, k); }, f(ix, iy));
  }
  return out;
}

/// 1D variant on a line of samples.
inline std::vector<double> apply_line(const DiffOperator& op, std::span<const double> f, double spacing) {
  const int n = static_cast<int>(f.size());
  std::vector<double> out(f.size());
  const double scale = 1.0 / std::pow(spacing, op.order());
  for (int i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] =
        scale * contract(op.line_stencil(i, n), [&](int k) { return f[static_cast<std::size_t>(k)]; }, f[static_cast<std::size_t>(i)]);
  return out;
}

/// Derivative operators for both axes and both orders.
struct OperatorSet {
  std::array<DiffOperator, 2> d1;
  std::array<DiffOperator, 2> d2;

  static OperatorSet build(const FilterBank& fb) {
    OperatorSet s;
    for (int a = 0; a < 2; ++a) {
      s.d1[static_cast<std::size_t>(a)] = build_diff_operator(fb, a, 1);
      s.d2[static_cast<std::size_t>(a)] = build_diff_operator(fb, a, 2);
    }
    return s;
  }
  const DiffOperator& get(int axis, int alpha) const {
    return alpha == 1 ? d1[static_cast<std::size_t>(axis)] : d2[static_cast<std::size_t>(axis)];
  }
};

/// Derivative evaluation plan for one sparse grid.
///
/// Each entry differentiates along an axis on the finest level at which one
/// of its immediate neighbours along that axis is present. Stencil inputs
/// missing from the grid are ghost points whose values are reconstructed
/// by interpolation (zero details) before every contraction.
class StencilPlan {
 public:
  StencilPlan(const SparseField& field, const FilterBank& fb, const OperatorSet& ops) : grid_size_(field.size()) {
    const auto& g = field.geometry();
    const int top = field.finest_level();

    // Level per entry and axis.
    std::array<std::vector<int>, 2> level;
    for (int axis = 0; axis < 2; ++axis) {
      auto& lv = level[static_cast<std::size_t>(axis)];
      lv.resize(field.size());
      for (std::size_t i = 0; i < field.size(); ++i) {
        const auto& idx = field.index(i);
        const int k = axis == 0 ? idx.k1 : idx.k2;
        const int own = k == 0 ? 0 : std::max(0, idx.level - std::countr_zero(static_cast<unsigned>(k)));
        int chosen = own;
        for (int l = top; l > own; --l) {
          const int m = std::max(l, idx.level);
          auto p = lattice_position(idx, m);
          const int step = 1 << (m - l);
          auto q = p;
          q[static_cast<std::size_t>(axis)] += step;
          auto r = p;
          r[static_cast<std::size_t>(axis)] -= step;
          if (field.find_lattice(m, q[0], q[1]) != npos || field.find_lattice(m, r[0], r[1]) != npos) {
            chosen = l;
            break;
          }
        }
        lv[i] = chosen;
      }
    }

    // Stencil nodes per entry and axis, looked up once and shared by both
    // derivative orders. A node is either a grid entry or a ghost.
    struct PendingTap {
      std::size_t a, b;  // grid entry, or kGhostBit | ghost slot
      double wa, wb;
    };
    constexpr std::size_t kGhostBit = std::size_t{1} << 63;
    std::array<std::array<std::vector<PendingTap>, 2>, 2> pending;  // [axis][alpha-1]
    std::array<std::array<std::vector<std::size_t>, 2>, 2> begins;
    std::array<std::array<std::vector<double>, 2>, 2> scales;
    std::vector<DyadicIndex> ghosts;
    std::vector<std::size_t> local;  // node -> resolved slot, for one entry
    for (int axis = 0; axis < 2; ++axis) {
      const auto ax = static_cast<std::size_t>(axis);
      const DiffOperator& op1 = ops.get(axis, 1);
      const DiffOperator& op2 = ops.get(axis, 2);
      std::map<std::pair<int, int>, std::array<std::vector<Tap>, 2>> cache;
      for (int al = 0; al < 2; ++al) {
        begins[ax][static_cast<std::size_t>(al)].resize(field.size() + 1);
        scales[ax][static_cast<std::size_t>(al)].resize(field.size());
        pending[ax][static_cast<std::size_t>(al)].reserve(field.size() * static_cast<std::size_t>(2 * op2.radius() + 2));
      }
      for (std::size_t i = 0; i < field.size(); ++i) {
        const auto& idx = field.index(i);
        const int l = level[ax][i];
        const int m = std::max(l, idx.level);
        const auto p = lattice_position(idx, m);
        const int shift = m - l;
        const int node = p[ax] >> shift;
        const int n = g.extent(l);
        auto it = cache.find({l, node});
        if (it == cache.end())
          it = cache.emplace(std::pair{l, node}, std::array{op1.line_stencil(node, n), op2.line_stencil(node, n)}).first;
        int lo = node, hi = node;
        for (const auto& taps : it->second)
          for (const Tap& t : taps) {
            lo = std::min({lo, t.a, t.b});
            hi = std::max({hi, t.a, t.b});
          }
        local.assign(static_cast<std::size_t>(hi - lo + 1), npos);
        const auto resolve = [&](int c) {
          std::size_t& slot = local[static_cast<std::size_t>(c - lo)];
          if (slot == npos) {
            auto q = p;
            q[ax] = c << shift;
            const DyadicIndex d = canonical_index(m, q[0], q[1]);
            const std::size_t e = field.find(d);
            if (e != npos) {
              slot = e;
            } else {
              slot = kGhostBit | ghosts.size();
              ghosts.push_back(d);
            }
          }
          return slot;
        };
        for (int al = 0; al < 2; ++al) {
          const auto a2 = static_cast<std::size_t>(al);
          auto& pt = pending[ax][a2];
          begins[ax][a2][i] = pt.size();
          scales[ax][a2][i] = 1.0 / std::pow(g.spacing(axis, l), al + 1);
          for (const Tap& t : it->second[a2]) pt.push_back({resolve(t.a), resolve(t.b), t.weight_a, t.weight_b});
        }
      }
      for (int al = 0; al < 2; ++al) begins[ax][static_cast<std::size_t>(al)][field.size()] = pending[ax][static_cast<std::size_t>(al)].size();
    }

    // Augmented grid: field plus ghosts, closed.
    std::vector<DyadicIndex> all = field.indices();
    all.insert(all.end(), ghosts.begin(), ghosts.end());
    aug_ = SparseField::from_indices(g, 1, close_index_set(std::move(all), g, fb));
    aug_plan_ = TransformPlan(aug_, fb);
    grid_to_aug_.resize(field.size());
    {
      std::size_t j = 0;
      for (std::size_t i = 0; i < field.size(); ++i) {
        while (aug_.index(j) < field.index(i)) ++j;
        grid_to_aug_[i] = j;
      }
    }
    std::vector<bool> in_grid(aug_.size(), false);
    for (std::size_t a : grid_to_aug_) in_grid[a] = true;
    for (std::size_t i = 0; i < aug_.size(); ++i) {
      const int lam = aug_.index(i).lambda;
      if (!in_grid[i]) fill_program_.push_back({i, true});
      else if (lam == 1) fill_program_.push_back({i, false});
    }
    ghost_count_ = aug_.size() - field.size();

    std::vector<std::size_t> ghost_to_aug(ghosts.size());
    for (std::size_t k = 0; k < ghosts.size(); ++k) ghost_to_aug[k] = aug_.find(ghosts[k]);
    const auto to_aug = [&](std::size_t slot) {
      return static_cast<int>((slot & kGhostBit) != 0 ? ghost_to_aug[slot & ~kGhostBit] : grid_to_aug_[slot]);
    };
    for (std::size_t ax = 0; ax < 2; ++ax) {
      for (std::size_t al = 0; al < 2; ++al) {
        auto& prog = programs_[ax][al];
        prog.begin = std::move(begins[ax][al]);
        prog.scale = std::move(scales[ax][al]);
        prog.taps.reserve(pending[ax][al].size());
        for (const auto& t : pending[ax][al]) prog.taps.push_back({to_aug(t.a), to_aug(t.b), t.wa, t.wb});
      }
    }
    value_buf_.resize(aug_.size());
    coeff_buf_.resize(aug_.size());
  }

  std::size_t grid_size() const { return grid_size_; }
  std::size_t ghost_count() const { return ghost_count_; }

  /// Loads grid values and reconstructs all ghost values. Returns the
  /// augmented value buffer consumed by `apply`.
  std::span<const double> fill(std::span<const double> grid_values) {
    std::vector<double> buf(aug_.size(), 0.0);
    fill_into(grid_values, buf);
    value_buf_ = std::move(buf);
    return value_buf_;
  }

  /// Same as fill, into a caller-owned buffer of size augmented_size().
  void fill_into(std::span<const double> grid_values, std::vector<double>& buf) {
    buf.resize(aug_.size());
    for (std::size_t i = 0; i < grid_size_; ++i) buf[grid_to_aug_[i]] = grid_values[i];
    for (const auto& step : fill_program_) {
      if (step.ghost) {
        coeff_buf_[step.entry] = 0.0;
        aug_plan_.inverse_one(step.entry, buf, coeff_buf_);
      } else {
        aug_plan_.forward_one(step.entry, buf, coeff_buf_);
      }
    }
  }

  std::size_t augmented_size() const { return aug_.size(); }

  /// Derivative at every grid entry from an augmented buffer.
  void apply(int axis, int alpha, std::span<const double> augmented, std::span<double> out) const {
    const auto& prog = programs_[static_cast<std::size_t>(axis)][static_cast<std::size_t>(alpha - 1)];
    for (std::size_t i = 0; i < grid_size_; ++i) {
      const double centre = augmented[grid_to_aug_[i]];
      double acc = 0.0;
      for (std::size_t k = prog.begin[i]; k < prog.begin[i + 1]; ++k) {
        const Tap& t = prog.taps[k];
        acc += t.weight_a * (augmented[static_cast<std::size_t>(t.a)] - centre) +
               t.weight_b * (augmented[static_cast<std::size_t>(t.b)] - centre);
      }
      out[i] = prog.scale[i] * acc;
    }
  }

  /// Convenience: fill then apply.
  std::vector<double> derivative(int axis, int alpha, std::span<const double> grid_values) {
    std::vector<double> buf;
    fill_into(grid_values, buf);
    std::vector<double> out(grid_size_);
    apply(axis, alpha, buf, out);
    return out;
  }

 private:
  struct Program {
    std::vector<Tap> taps;
    std::vector<std::size_t> begin;
    std::vector<double> scale;
  };
  struct FillStep {
    std::size_t entry;
    bool ghost;
  };

  std::size_t grid_size_ = 0;
  std::size_t ghost_count_ = 0;
  SparseField aug_;
  TransformPlan aug_plan_;
  std::vector<std::size_t> grid_to_aug_;
  std::vector<FillStep> fill_program_;
  std::array<std::array<Program, 2>, 2> programs_;
  std::vector<double> value_buf_;
  std::vector<double> coeff_buf_;
};

}  // namespace awcm
