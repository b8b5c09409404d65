#pragma once

// Sparse multiresolution collocation grid stored as a sorted coordinate list.
//
// Entries are ordered level-major: (j, lambda, k2, k1). That order is also a
// valid evaluation order for the inverse transform, since every prediction
// input of an entry sorts before it.

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "awcm/filters.hpp"
#include "awcm/format.hpp"
#include "awcm/transform.hpp"

namespace awcm {

class GridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when refinement would need a level above the configured cap.
class RefinementLimitError : public GridError {
 public:
  using GridError::GridError;
};

inline constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

struct GridGeometry {
  int n0 = 8;
  int j_cap = 12;
  std::array<double, 2> lo{0.0, 0.0};
  std::array<double, 2> hi{1.0, 1.0};

  int extent(int level) const { return dense_extent(n0, level); }
  double spacing(int axis, int level) const { return (hi[axis] - lo[axis]) / static_cast<double>(n0 << level); }
  double coordinate(int axis, int level, int k) const {
    // Interpolate from both ends so mirrored points get mirrored coordinates.
    const int n = n0 << level;
    return (lo[axis] * static_cast<double>(n - k) + hi[axis] * static_cast<double>(k)) / static_cast<double>(n);
  }
};

/// Basis function / collocation point identifier. k is on the level-j lattice.
struct DyadicIndex {
  int level = 0;
  int lambda = 0;
  int k1 = 0;
  int k2 = 0;

  friend bool operator==(const DyadicIndex&, const DyadicIndex&) = default;
  friend bool operator<(const DyadicIndex& a, const DyadicIndex& b) {
    return std::tie(a.level, a.lambda, a.k2, a.k1) < std::tie(b.level, b.lambda, b.k2, b.k1);
  }
};

namespace detail {

// Packed form ordering like DyadicIndex::operator< for well-formed indices.
inline std::uint64_t sort_key(const DyadicIndex& d) {
  return (static_cast<std::uint64_t>(d.level) << 58) | (static_cast<std::uint64_t>(d.lambda) << 56) |
         (static_cast<std::uint64_t>(d.k2) << 28) | static_cast<std::uint64_t>(d.k1);
}

inline DyadicIndex from_sort_key(std::uint64_t k) {
  constexpr std::uint64_t mask = (std::uint64_t{1} << 28) - 1;
  return {static_cast<int>(k >> 58), static_cast<int>((k >> 56) & 3), static_cast<int>(k & mask),
          static_cast<int>((k >> 28) & mask)};
}

inline bool packable(const DyadicIndex& d) {
  return d.level >= 0 && d.level < 64 && d.lambda >= 0 && d.lambda < 4 && d.k1 >= 0 && d.k2 >= 0 &&
         d.k1 < (1 << 28) && d.k2 < (1 << 28);
}

/// Sorts and deduplicates; falls back to the comparison sort for indices
/// that do not pack.
inline void sort_unique(std::vector<DyadicIndex>& v) {
  if (!std::all_of(v.begin(), v.end(), packable)) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return;
  }
  std::vector<std::uint64_t> keys(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) keys[i] = sort_key(v[i]);
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  v.resize(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) v[i] = from_sort_key(keys[i]);
}

}  // namespace detail

/// Canonical index of level-j lattice point (x, y): the coarsest level on
/// which the point exists.
inline DyadicIndex canonical_index(int level, int x, int y) {
  while (level > 0 && (x & 1) == 0 && (y & 1) == 0) {
    x >>= 1;
    y >>= 1;
    --level;
  }
  const int lambda = level == 0 ? 0 : ((x & 1) != 0 ? 1 : 0) + ((y & 1) != 0 ? 2 : 0);
  return {level, lambda, x, y};
}

/// Position of `idx` on the level-`level` lattice (level >= idx.level).
inline std::array<int, 2> lattice_position(const DyadicIndex& idx, int level) {
  const int s = level - idx.level;
  return {idx.k1 << s, idx.k2 << s};
}

inline bool is_well_formed(const DyadicIndex& idx, const GridGeometry& g) {
  if (idx.level < 0 || idx.level > g.j_cap) return false;
  const int n = g.extent(idx.level);
  if (idx.k1 < 0 || idx.k2 < 0 || idx.k1 >= n || idx.k2 >= n) return false;
  if (idx.level == 0) return idx.lambda == 0;
  const int lambda = ((idx.k1 & 1) != 0 ? 1 : 0) + ((idx.k2 & 1) != 0 ? 2 : 0);
  return lambda != 0 && lambda == idx.lambda;
}

enum EntryFlag : std::uint8_t {
  kEssential = 1,
  kBuffer = 2,
};

/// Sorted coordinate-list field with parallel per-variable arrays.
class SparseField {
 public:
  SparseField() = default;
  SparseField(GridGeometry geometry, int num_vars) : geom_(geometry), values_(num_vars), coeffs_(num_vars) {}

  /// Builds a field over `indices`, which are sorted, deduplicated and
  /// validated here. Values and coefficients start at zero.
  static SparseField from_indices(const GridGeometry& geometry, int num_vars, std::vector<DyadicIndex> indices) {
    SparseField f(geometry, num_vars);
    detail::sort_unique(indices);
    for (const auto& idx : indices) {
      if (!is_well_formed(idx, geometry)) {
        throw GridError("index out of domain bounds: j=" + std::to_string(idx.level) + " lambda=" +
                        std::to_string(idx.lambda) + " k=(" + std::to_string(idx.k1) + "," +
                        std::to_string(idx.k2) + ")");
      }
    }
    f.index_ = std::move(indices);
    f.flags_.assign(f.index_.size(), 0);
    for (auto& v : f.values_) v.assign(f.index_.size(), 0.0);
    for (auto& c : f.coeffs_) c.assign(f.index_.size(), 0.0);
    f.rebuild_blocks();
    return f;
  }

  const GridGeometry& geometry() const { return geom_; }
  std::size_t size() const { return index_.size(); }
  int num_vars() const { return static_cast<int>(values_.size()); }

  const std::vector<DyadicIndex>& indices() const { return index_; }
  const DyadicIndex& index(std::size_t i) const { return index_[i]; }

  std::span<double> values(int var) { return values_[static_cast<std::size_t>(var)]; }
  std::span<const double> values(int var) const { return values_[static_cast<std::size_t>(var)]; }
  std::span<double> coeffs(int var) { return coeffs_[static_cast<std::size_t>(var)]; }
  std::span<const double> coeffs(int var) const { return coeffs_[static_cast<std::size_t>(var)]; }

  std::uint8_t flags(std::size_t i) const { return flags_[i]; }
  void set_flags(std::size_t i, std::uint8_t f) { flags_[i] = f; }

  /// Entry index of `idx`, or npos.
  std::size_t find(const DyadicIndex& idx) const {
    if (idx.level < 0 || idx.level > geom_.j_cap || idx.k1 < 0 || idx.k2 < 0 || idx.k1 >= kMaxK || idx.k2 >= kMaxK ||
        slots_.empty())
      return npos;
    const std::uint64_t key = pack(idx);
    for (std::size_t h = mix(key) & slot_mask_;; h = (h + 1) & slot_mask_) {
      const Slot& s = slots_[h];
      if (s.entry == kEmpty) return npos;
      if (s.key == key) return s.entry;
    }
  }

  /// Entry at level-`level` lattice point (x, y), or npos.
  std::size_t find_lattice(int level, int x, int y) const {
    const int n = geom_.extent(level);
    if (x < 0 || y < 0 || x >= n || y >= n) return npos;
    return find(canonical_index(level, x, y));
  }

  int finest_level() const { return index_.empty() ? 0 : index_.back().level; }

  /// [begin, end) of the entries with the given level and subband.
  std::pair<std::size_t, std::size_t> block(int level, int lambda) const {
    const std::size_t b = block_id(level, lambda);
    if (b + 1 >= blocks_.size()) return {index_.size(), index_.size()};
    return {blocks_[b], blocks_[b + 1]};
  }

  std::array<double, 2> position(std::size_t i) const {
    const auto& idx = index_[i];
    return {geom_.coordinate(0, idx.level, idx.k1), geom_.coordinate(1, idx.level, idx.k2)};
  }

  std::size_t count_flag(std::uint8_t f) const {
    return static_cast<std::size_t>(std::count_if(flags_.begin(), flags_.end(), [f](std::uint8_t x) { return (x & f) != 0; }));
  }

 private:
  std::size_t block_id(int level, int lambda) const {
    return level == 0 ? 0 : 1 + 3 * static_cast<std::size_t>(level - 1) + static_cast<std::size_t>(lambda - 1);
  }

  static constexpr int kMaxK = 1 << 28;
  static constexpr std::uint32_t kEmpty = std::numeric_limits<std::uint32_t>::max();
  struct Slot {
    std::uint64_t key = 0;
    std::uint32_t entry = kEmpty;
  };

  static std::uint64_t pack(const DyadicIndex& idx) {
    return (static_cast<std::uint64_t>(idx.level) << 58) | (static_cast<std::uint64_t>(idx.lambda) << 56) |
           (static_cast<std::uint64_t>(idx.k1) << 28) | static_cast<std::uint64_t>(idx.k2);
  }
  static std::size_t mix(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    return static_cast<std::size_t>(x);
  }

  void rebuild_blocks() {
    if (index_.size() >= kEmpty) throw GridError("too many grid entries");
    std::size_t cap = 16;
    while (cap < 2 * index_.size()) cap <<= 1;
    slots_.assign(cap, Slot{});
    slot_mask_ = cap - 1;
    for (std::size_t i = 0; i < index_.size(); ++i) {
      if (index_[i].k1 >= kMaxK || index_[i].k2 >= kMaxK) throw GridError("lattice too large for the index table");
      const std::uint64_t key = pack(index_[i]);
      std::size_t h = mix(key) & slot_mask_;
      while (slots_[h].entry != kEmpty) h = (h + 1) & slot_mask_;
      slots_[h] = {key, static_cast<std::uint32_t>(i)};
    }

    const std::size_t nblocks = 1 + 3 * static_cast<std::size_t>(geom_.j_cap);
    blocks_.assign(nblocks + 1, 0);
    std::size_t pos = 0;
    for (std::size_t b = 0; b < nblocks; ++b) {
      blocks_[b] = pos;
      while (pos < index_.size() && block_id(index_[pos].level, index_[pos].lambda) == b) ++pos;
    }
    blocks_[nblocks] = pos;
  }

  GridGeometry geom_;
  std::vector<DyadicIndex> index_;
  std::vector<std::uint8_t> flags_;
  std::vector<std::vector<double>> values_;
  std::vector<std::vector<double>> coeffs_;
  std::vector<std::size_t> blocks_;
  std::vector<Slot> slots_;  // open-addressed lookup by packed index
  std::size_t slot_mask_ = 0;
};

// ---------------------------------------------------------------------------
// Dependency structure of the inverse transform

/// Prediction stencil of `idx` along `axis`, as level-j lattice coordinates
/// of the inputs along that axis.
inline PredictionStencil axis_prediction(const DyadicIndex& idx, int axis, const GridGeometry& g, const FilterBank& fb) {
  const int k = axis == 0 ? idx.k1 : idx.k2;
  PredictionStencil s = fb.prediction_stencil((k - 1) / 2, g.extent(idx.level - 1));
  for (Tap& t : s.taps) {
    t.a *= 2;
    t.b *= 2;
  }
  return s;
}

/// Allocation-free form of axis_prediction: calls f(Tap) with level-j node indices.
template <class F>
void visit_axis_prediction(const DyadicIndex& idx, int axis, const GridGeometry& g, const FilterBank& fb, F&& f) {
  const int k = axis == 0 ? idx.k1 : idx.k2;
  fb.visit_prediction((k - 1) / 2, g.extent(idx.level - 1), [&](Tap t) {
    t.a *= 2;
    t.b *= 2;
    f(t);
  });
}

/// Direct inputs of the inverse transform at `idx`: lambda=1 and 2 depend on
/// coarser values along one axis; lambda=3 depends on same-level lambda=2
/// values (x) and lambda=1 details (y).
inline void append_dependencies(const DyadicIndex& idx, const GridGeometry& g, const FilterBank& fb,
                                std::vector<DyadicIndex>& out) {
  if (idx.level == 0) return;
  if (idx.lambda == 1 || idx.lambda == 3) {
    visit_axis_prediction(idx, 0, g, fb, [&](const Tap& t) {
      out.push_back(canonical_index(idx.level, t.a, idx.k2));
      if (t.b != t.a) out.push_back(canonical_index(idx.level, t.b, idx.k2));
    });
  }
  if (idx.lambda == 2 || idx.lambda == 3) {
    visit_axis_prediction(idx, 1, g, fb, [&](const Tap& t) {
      out.push_back(canonical_index(idx.level, idx.k1, t.a));
      if (t.b != t.a) out.push_back(canonical_index(idx.level, idx.k1, t.b));
    });
  }
}

/// Adds every dense level-0 point and the full reconstruction closure.
inline std::vector<DyadicIndex> close_index_set(std::vector<DyadicIndex> set, const GridGeometry& g, const FilterBank& fb) {
  int top = 0;
  for (const auto& idx : set) top = std::max(top, idx.level);
  std::vector<std::vector<DyadicIndex>> by_level(static_cast<std::size_t>(top) + 1);
  for (const auto& idx : set) by_level[static_cast<std::size_t>(idx.level)].push_back(idx);

  std::vector<DyadicIndex> deps;
  for (int j = top; j >= 1; --j) {
    auto& bucket = by_level[static_cast<std::size_t>(j)];
    detail::sort_unique(bucket);
    // lambda=3 first: its inputs live on the same level.
    deps.clear();
    for (const auto& idx : bucket)
      if (idx.lambda == 3) append_dependencies(idx, g, fb, deps);
    bucket.insert(bucket.end(), deps.begin(), deps.end());
    detail::sort_unique(bucket);
    deps.clear();
    for (const auto& idx : bucket)
      if (idx.lambda != 3) append_dependencies(idx, g, fb, deps);
    for (const auto& d : deps) by_level[static_cast<std::size_t>(d.level)].push_back(d);
  }

  std::vector<DyadicIndex> out;
  const int n = g.extent(0);
  out.reserve(static_cast<std::size_t>(n) * n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) out.push_back({0, 0, x, y});
  for (int j = 1; j <= top; ++j) {
    const auto& bucket = by_level[static_cast<std::size_t>(j)];
    out.insert(out.end(), bucket.begin(), bucket.end());
  }
  detail::sort_unique(out);
  return out;
}

/// Precomputed tap lists for sparse forward/inverse transforms over one
/// index set. Tap a/b fields hold entry indices.
class TransformPlan {
 public:
  TransformPlan() = default;

  TransformPlan(const SparseField& field, const FilterBank& fb) {
    const auto& g = field.geometry();
    const std::size_t n = field.size();
    x_begin_.assign(n + 1, 0);
    y_begin_.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& idx = field.index(i);
      x_begin_[i] = x_taps_.size();
      y_begin_[i] = y_taps_.size();
      if (idx.level == 0) continue;
      if (idx.lambda == 1 || idx.lambda == 3) {
        visit_axis_prediction(idx, 0, g, fb, [&](const Tap& t) {
          x_taps_.push_back(resolve(field, t, [&](int c) { return canonical_index(idx.level, c, idx.k2); }));
        });
      }
      if (idx.lambda == 2 || idx.lambda == 3) {
        visit_axis_prediction(idx, 1, g, fb, [&](const Tap& t) {
          y_taps_.push_back(resolve(field, t, [&](int c) { return canonical_index(idx.level, idx.k1, c); }));
        });
      }
    }
    x_begin_[n] = x_taps_.size();
    y_begin_[n] = y_taps_.size();
    lambda_.reserve(n);
    for (const auto& idx : field.indices()) lambda_.push_back(static_cast<std::uint8_t>(idx.lambda));
  }

  std::size_t size() const { return lambda_.size(); }

  /// Coefficients from values for every entry.
  void forward(std::span<const double> v, std::span<double> c) const {
    for (std::size_t i = 0; i < lambda_.size(); ++i) forward_one(i, v, c);
  }

  void forward_one(std::size_t i, std::span<const double> v, std::span<double> c) const {
    switch (lambda_[i]) {
      case 0: c[i] = v[i]; break;
      case 1: c[i] = v[i] - sum(x_taps_, x_begin_[i], x_begin_[i + 1], v); break;
      case 2: c[i] = v[i] - sum(y_taps_, y_begin_[i], y_begin_[i + 1], v); break;
      default: c[i] = (v[i] - sum(x_taps_, x_begin_[i], x_begin_[i + 1], v)) - sum(y_taps_, y_begin_[i], y_begin_[i + 1], c);
    }
  }

  /// Value of entry i from its coefficient and earlier entries.
  void inverse_one(std::size_t i, std::span<double> v, std::span<const double> c) const {
    switch (lambda_[i]) {
      case 0: v[i] = c[i]; break;
      case 1: v[i] = c[i] + sum(x_taps_, x_begin_[i], x_begin_[i + 1], v); break;
      case 2: v[i] = c[i] + sum(y_taps_, y_begin_[i], y_begin_[i + 1], v); break;
      default: v[i] = (c[i] + sum(y_taps_, y_begin_[i], y_begin_[i + 1], c)) + sum(x_taps_, x_begin_[i], x_begin_[i + 1], v);
    }
  }

  void inverse(std::span<double> v, std::span<const double> c) const {
    for (std::size_t i = 0; i < lambda_.size(); ++i) inverse_one(i, v, c);
  }

 private:
  template <class ToIndex>
  static Tap resolve(const SparseField& f, const Tap& t, ToIndex&& to_index) {
    const std::size_t a = f.find(to_index(t.a));
    const std::size_t b = t.b == t.a ? a : f.find(to_index(t.b));
    if (a == npos || b == npos) throw GridError("field is not closed under reconstruction");
    return {static_cast<int>(a), static_cast<int>(b), t.weight_a, t.weight_b};
  }

  static double sum(const std::vector<Tap>& taps, std::size_t begin, std::size_t end, std::span<const double> v) {
    double acc = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
      const Tap& t = taps[k];
      acc += t.weight_a * v[static_cast<std::size_t>(t.a)] + t.weight_b * v[static_cast<std::size_t>(t.b)];
    }
    return acc;
  }

  std::vector<std::uint8_t> lambda_;
  std::vector<Tap> x_taps_, y_taps_;
  std::vector<std::size_t> x_begin_, y_begin_;
};

/// Recomputes coefficients of every variable from the stored values.
inline void forward_sparse(SparseField& field, const FilterBank& fb) {
  const TransformPlan plan(field, fb);
  for (int v = 0; v < field.num_vars(); ++v) plan.forward(field.values(v), field.coeffs(v));
}

/// Recomputes values of every variable from the stored coefficients.
inline void inverse_sparse(SparseField& field, const FilterBank& fb) {
  const TransformPlan plan(field, fb);
  for (int v = 0; v < field.num_vars(); ++v) plan.inverse(field.values(v), field.coeffs(v));
}

/// Checks sort order, uniqueness, level-0 completeness and closure.
/// Returns an empty string when valid, else a description of the first problem.
inline std::string validate(const SparseField& field, const FilterBank& fb) {
  const auto& idx = field.indices();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (!is_well_formed(idx[i], field.geometry())) return "malformed index at entry " + std::to_string(i);
    if (i > 0 && !(idx[i - 1] < idx[i])) return "entries not strictly sorted at " + std::to_string(i);
  }
  const int n0 = field.geometry().extent(0);
  if (field.block(0, 0).second - field.block(0, 0).first != static_cast<std::size_t>(n0) * n0)
    return "level-0 block incomplete";
  std::vector<DyadicIndex> deps;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    deps.clear();
    append_dependencies(idx[i], field.geometry(), fb, deps);
    for (const auto& d : deps)
      if (field.find(d) == npos) return "closure violated: entry " + std::to_string(i) + " misses an input";
  }
  return {};
}

// ---------------------------------------------------------------------------
// Zones

/// Prediction zone of a detail: same-level detail points within 2*width
/// level-j steps, and level-(j+1) points within 2*width level-(j+1) steps of
/// its refined position. Children above the cap are reported through
/// `exceeds_cap` instead of being emitted.
inline void append_zone(const DyadicIndex& idx, const GridGeometry& g, int width, std::vector<DyadicIndex>& out,
                        bool* exceeds_cap = nullptr) {
  const int r = 2 * width;
  if (idx.level >= 1) {
    const int n = g.extent(idx.level);
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        const int x = idx.k1 + dx;
        const int y = idx.k2 + dy;
        if (x < 0 || y < 0 || x >= n || y >= n) continue;
        if ((x & 1) == 0 && (y & 1) == 0) continue;
        out.push_back(canonical_index(idx.level, x, y));
      }
    }
  }
  const int child = idx.level + 1;
  if (child > g.j_cap) {
    if (exceeds_cap != nullptr) *exceeds_cap = true;
    return;
  }
  const int n = g.extent(child);
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const int x = 2 * idx.k1 + dx;
      const int y = 2 * idx.k2 + dy;
      if (x < 0 || y < 0 || x >= n || y >= n) continue;
      if ((x & 1) == 0 && (y & 1) == 0) continue;
      out.push_back(canonical_index(child, x, y));
    }
  }
}

/// Detail entries whose scaled magnitude reaches eps in any variable.
inline bool is_significant(const SparseField& f, std::size_t i, double eps, std::span<const double> scales) {
  if (f.index(i).level == 0) return false;
  for (int v = 0; v < f.num_vars(); ++v) {
    const double s = scales.empty() ? 1.0 : scales[static_cast<std::size_t>(v)];
    if (std::abs(f.coeffs(v)[i]) >= eps * s) return true;
  }
  return false;
}

/// Marks entries essential (significant) or buffer (everything else above level 0).
inline void refresh_flags(SparseField& f, double eps, std::span<const double> scales) {
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f.index(i).level == 0) f.set_flags(i, 0);
    else f.set_flags(i, is_significant(f, i, eps, scales) ? kEssential : kBuffer);
  }
}

// ---------------------------------------------------------------------------
// Bulk mutation

/// Union of `base` and `additions`, closed under reconstruction. Existing
/// entries keep values and coefficients; new entries get zero details and
/// interpolated values. `base` coefficients must be current.
inline SparseField merge(const SparseField& base, const std::vector<DyadicIndex>& additions, const FilterBank& fb) {
  const auto& g = base.geometry();
  for (const auto& a : additions)
    if (!is_well_formed(a, g)) {
      throw GridError("index out of domain bounds: j=" + std::to_string(a.level) + " k=(" + std::to_string(a.k1) + "," +
                      std::to_string(a.k2) + ")");
    }
  std::vector<DyadicIndex> all = base.indices();
  all.insert(all.end(), additions.begin(), additions.end());
  SparseField out = SparseField::from_indices(g, base.num_vars(), close_index_set(std::move(all), g, fb));
  if (out.size() == base.size()) return base;

  std::vector<std::size_t> src(out.size(), npos);
  std::size_t j = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    while (j < base.size() && base.index(j) < out.index(i)) ++j;
    if (j < base.size() && base.index(j) == out.index(i)) src[i] = j;
  }
  const TransformPlan plan(out, fb);
  for (int v = 0; v < base.num_vars(); ++v) {
    auto vals = out.values(v);
    auto cs = out.coeffs(v);
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (src[i] != npos) {
        vals[i] = base.values(v)[src[i]];
        cs[i] = base.coeffs(v)[src[i]];
      } else {
        cs[i] = 0.0;
        plan.inverse_one(i, vals, cs);
      }
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i)
    out.set_flags(i, src[i] != npos ? base.flags(src[i]) : (out.index(i).level == 0 ? 0 : kBuffer));
  return out;
}

/// Keeps level 0, significant details, their prediction zones and the
/// reconstruction closure. Never inserts entries.
inline SparseField prune(const SparseField& field, double eps, std::span<const double> scales, int zone_width,
                         const FilterBank& fb) {
  std::vector<DyadicIndex> keep;
  std::vector<DyadicIndex> zone;
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (!is_significant(field, i, eps, scales)) continue;
    keep.push_back(field.index(i));
    zone.clear();
    append_zone(field.index(i), field.geometry(), zone_width, zone);
    for (const auto& z : zone)
      if (field.find(z) != npos) keep.push_back(z);
  }
  const auto closed = close_index_set(std::move(keep), field.geometry(), fb);
  SparseField out = SparseField::from_indices(field.geometry(), field.num_vars(), closed);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t s = field.find(out.index(i));
    if (s == npos) throw GridError("prune: input field is not closed");
    for (int v = 0; v < field.num_vars(); ++v) {
      out.values(v)[i] = field.values(v)[s];
      out.coeffs(v)[i] = field.coeffs(v)[s];
    }
  }
  refresh_flags(out, eps, scales);
  return out;
}

/// Sparse field from dense coefficients: level 0, every detail with
/// |d| >= eps and the closure. Retained entries keep their exact
/// coefficients, so values at retained points equal the input field.
inline SparseField compress(const CoefficientSet& coeffs, double eps, const GridGeometry& geometry, const FilterBank& fb) {
  coeffs.validate();
  if (geometry.n0 != coeffs.n0() || geometry.j_cap < coeffs.j_max())
    throw GridError("geometry does not match the coefficient set");
  const int top = coeffs.j_max();
  const Array2D& c = coeffs.data();
  std::vector<DyadicIndex> keep;
  for (int iy = 0; iy < c.ny(); ++iy)
    for (int ix = 0; ix < c.nx(); ++ix) {
      const DyadicIndex idx = canonical_index(top, ix, iy);
      if (idx.level > 0 && std::abs(c(ix, iy)) >= eps) keep.push_back(idx);
    }
  SparseField out = SparseField::from_indices(geometry, 1, close_index_set(std::move(keep), geometry, fb));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto p = lattice_position(out.index(i), top);
    out.coeffs(0)[i] = c(p[0], p[1]);
  }
  const TransformPlan plan(out, fb);
  plan.inverse(out.values(0), out.coeffs(0));
  const double one = 1.0;
  refresh_flags(out, eps, std::span<const double>(&one, 1));
  return out;
}

/// Dense level-`level` reconstruction of one variable (zero details elsewhere).
inline Array2D to_dense(const SparseField& field, int var, int level, const FilterBank& fb) {
  if (level < field.finest_level()) throw GridError("to_dense: level below the finest retained level");
  const int n = field.geometry().extent(level);
  Array2D c(n, n, 0.0);
  for (std::size_t i = 0; i < field.size(); ++i) {
    const auto p = lattice_position(field.index(i), level);
    c(p[0], p[1]) = field.coeffs(var)[i];
  }
  return inverse(CoefficientSet(std::move(c), field.geometry().n0, level), fb);
}

/// Entries on one lattice line of level `level`, ascending along `axis`.
/// axis 0 walks x along row y=line; axis 1 walks y along column x=line.
inline std::vector<std::size_t> slice(const SparseField& field, int axis, int line, int level) {
  std::vector<std::pair<int, std::size_t>> hits;
  for (int j = 0; j <= std::min(level, field.finest_level()); ++j) {
    const int s = level - j;
    if ((line & ((1 << s) - 1)) != 0) continue;
    const int k_line = line >> s;
    for (int lambda = (j == 0 ? 0 : 1); lambda <= (j == 0 ? 0 : 3); ++lambda) {
      const auto [b, e] = field.block(j, lambda);
      if (axis == 0) {
        const auto first = field.indices().begin() + static_cast<std::ptrdiff_t>(b);
        const auto last = field.indices().begin() + static_cast<std::ptrdiff_t>(e);
        const auto lo = std::lower_bound(first, last, DyadicIndex{j, lambda, 0, k_line});
        for (auto it = lo; it != last && it->k2 == k_line; ++it)
          hits.emplace_back(it->k1 << s, static_cast<std::size_t>(it - field.indices().begin()));
      } else {
        for (std::size_t i = b; i < e; ++i)
          if (field.index(i).k1 == k_line) hits.emplace_back(field.index(i).k2 << s, i);
      }
    }
  }
  std::sort(hits.begin(), hits.end());
  std::vector<std::size_t> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back(h.second);
  return out;
}

// ---------------------------------------------------------------------------
// Quadrature

/// Integrals of the level-`level` 1D interpolating scaling functions on a
/// line of n0*2^level cells with unit spacing. Obtained by pulling
/// trapezoidal weights back through `refine` levels of subdivision.
inline std::vector<double> scaling_integrals_1d(int cells, const FilterBank& fb, int refine = 14) {
  static std::mutex mutex;
  static std::map<std::array<int, 3>, std::vector<double>> memo;
  const std::array<int, 3> key{fb.order(), cells, refine};
  {
    const std::lock_guard lock(mutex);
    if (const auto it = memo.find(key); it != memo.end()) return it->second;
  }
  std::vector<double> w(static_cast<std::size_t>((cells << refine) + 1), 1.0);
  w.front() = w.back() = 0.5;
  double h = 1.0 / static_cast<double>(1 << refine);
  for (double& x : w) x *= h;
  const int half = fb.order() / 2;
  std::vector<double> interior;
  for (const auto& r : fb.prediction()) interior.push_back(to_double(r));
  for (int r = refine; r >= 1; --r) {
    const int n_coarse = (cells << (r - 1)) + 1;
    std::vector<double> c(static_cast<std::size_t>(n_coarse));
    for (int i = 0; i < n_coarse; ++i) c[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(2 * i)];
    for (int m = 0; m + 1 < n_coarse; ++m) {
      const double wm = w[static_cast<std::size_t>(2 * m + 1)];
      const int start = m - half + 1;
      if (start >= 0 && start + fb.order() <= n_coarse) {
        for (int q = 0; q < fb.order(); ++q) c[static_cast<std::size_t>(start + q)] += interior[static_cast<std::size_t>(q)] * wm;
        continue;
      }
      for (const Tap& t : fb.prediction_stencil(m, n_coarse).taps) {
        c[static_cast<std::size_t>(t.a)] += t.weight_a * wm;
        c[static_cast<std::size_t>(t.b)] += t.weight_b * wm;
      }
    }
    w = std::move(c);
  }
  const std::lock_guard lock(mutex);
  memo.emplace(key, w);
  return w;
}

/// Exact integral of the interpolant of one variable. Coefficients must be current.
inline double integrate(const SparseField& field, int var, const FilterBank& fb) {
  const auto& g = field.geometry();
  // Long lines share boundary integrals; only short lines need their own table.
  const int long_cells = 8 * fb.order();
  std::vector<double> long_table;
  std::vector<std::vector<double>> short_tables(static_cast<std::size_t>(g.j_cap) + 1);
  const auto unit_integral = [&](int level, int k) {
    const int cells = g.n0 << level;
    if (cells <= long_cells) {
      auto& t = short_tables[static_cast<std::size_t>(level)];
      if (t.empty()) t = scaling_integrals_1d(cells, fb);
      return t[static_cast<std::size_t>(k)];
    }
    if (long_table.empty()) long_table = scaling_integrals_1d(long_cells, fb);
    const int d = std::min(k, cells - k);
    return d >= long_cells / 2 ? 1.0 : long_table[static_cast<std::size_t>(d)];
  };
  double acc = 0.0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    // Basis of (j, lambda, k): level-j scaling function along odd axes,
    // level-(j-1) scaling function along even axes.
    const auto& idx = field.index(i);
    const bool odd_x = idx.lambda == 1 || idx.lambda == 3;
    const bool odd_y = idx.lambda == 2 || idx.lambda == 3;
    const int lx = idx.level == 0 || odd_x ? idx.level : idx.level - 1;
    const int ly = idx.level == 0 || odd_y ? idx.level : idx.level - 1;
    const int kx = lx == idx.level ? idx.k1 : idx.k1 / 2;
    const int ky = ly == idx.level ? idx.k2 : idx.k2 / 2;
    const double wx = unit_integral(lx, kx) * g.spacing(0, lx);
    const double wy = unit_integral(ly, ky) * g.spacing(1, ly);
    acc += field.coeffs(var)[i] * wx * wy;
  }
  return acc;
}

/// Plain-text dump: `x y j lambda value...`, one entry per line in sort order.
inline void dump_grid(const SparseField& field, std::ostream& os) {
  for (std::size_t i = 0; i < field.size(); ++i) {
    const auto p = field.position(i);
    const auto& idx = field.index(i);
    os << format_double(p[0]) << ' ' << format_double(p[1]) << ' ' << idx.level << ' ' << idx.lambda;
    for (int v = 0; v < field.num_vars(); ++v) os << ' ' << format_double(field.values(v)[i]);
    os << '\n';
  }
}

}  // namespace awcm
