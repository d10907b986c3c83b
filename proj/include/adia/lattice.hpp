#pragma once

// Cubic lattice geometry: specs, the periodic dispersion with exact degeneracy
// grouping, sparse adjacency, and marked-site symmetry orbits of the open grid.
//
// Sites are indexed row-major over coordinates (c_1, ..., c_d): c_1 is the
// most significant digit, so index = ((c_1 * L + c_2) * L + ...) + c_d.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "adia/cyclotomic.hpp"
#include "adia/errors.hpp"

namespace adia {

enum class Boundary { Periodic, Open };

inline const char* to_string(Boundary b) { return b == Boundary::Periodic ? "periodic" : "open"; }

struct LatticeSpec {
  int dimension = 1;
  int linear_size = 3;
  Boundary boundary = Boundary::Periodic;
  std::int64_t marked_site = 0;
};

struct ModelParams {
  double t = 1.0;        // hopping
  double mu = 1.0;       // marked-site potential depth
  double epsilon = 1.0;  // adiabatic accuracy
};

/// L^d, or ValidationError if it leaves the 62-bit index range.
inline std::int64_t checked_site_count(int dimension, int linear_size) {
  if (dimension < 1) throw ValidationError("dimension must be >= 1");
  if (linear_size < 1) throw ValidationError("linear size must be >= 1");
  constexpr std::int64_t kLimit = std::int64_t{1} << 62;
  std::int64_t n = 1;
  for (int i = 0; i < dimension; ++i) {
    if (n > kLimit / linear_size)
      throw ValidationError(fmt::format("L^d = {}^{} exceeds the site index range", linear_size, dimension));
    n *= linear_size;
  }
  return n;
}

inline std::int64_t site_count(const LatticeSpec& spec) {
  return checked_site_count(spec.dimension, spec.linear_size);
}

inline void validate(const LatticeSpec& spec) {
  const std::int64_t n = site_count(spec);
  if (n < 2) throw ValidationError("lattice must have at least two sites");
  if (spec.boundary == Boundary::Periodic && spec.linear_size < 3)
    throw ValidationError(fmt::format("periodic lattices need L >= 3 (got L = {})", spec.linear_size));
  if (spec.marked_site < 0 || spec.marked_site >= n)
    throw ValidationError(fmt::format("marked site {} outside [0, {})", spec.marked_site, n));
}

inline void validate(const ModelParams& p) {
  if (!(p.t > 0.0) || !std::isfinite(p.t)) throw ValidationError("hopping t must be positive");
  if (!(p.mu > 0.0) || !std::isfinite(p.mu)) throw ValidationError("marked-site potential mu must be positive");
  if (!(p.epsilon > 0.0) || !std::isfinite(p.epsilon)) throw ValidationError("epsilon must be positive");
}

inline std::vector<int> site_coordinates(const LatticeSpec& spec, std::int64_t site) {
  std::vector<int> c(static_cast<std::size_t>(spec.dimension));
  for (int axis = spec.dimension - 1; axis >= 0; --axis) {
    c[static_cast<std::size_t>(axis)] = static_cast<int>(site % spec.linear_size);
    site /= spec.linear_size;
  }
  return c;
}

inline std::int64_t site_index(const LatticeSpec& spec, std::span<const int> coords) {
  std::int64_t idx = 0;
  for (int c : coords) idx = idx * spec.linear_size + c;
  return idx;
}

// ---------------------------------------------------------------------------
// Periodic dispersion

struct DispersionLevel {
  double eps;      // adjacency eigenvalue
  double offset;   // 2d - eps, evaluated without cancellation
  std::int64_t multiplicity;
  detail::CycloKey key;
};

struct DispersionTable {
  int dimension = 0;
  int linear_size = 0;
  std::int64_t site_count = 0;
  std::vector<DispersionLevel> levels;  // descending eps

  std::int64_t total_multiplicity() const {
    std::int64_t s = 0;
    for (const auto& l : levels) s += l.multiplicity;
    return s;
  }
};

namespace detail {

struct LevelAccumulator {
  double eps;
  double offset;
  double weight;            // summed product weight (multiplicity or overlap)
  std::int64_t modes;
};

struct AxisLevel {
  CycloKey key;
  double eps;
  double offset;
  double weight;
  std::int64_t modes;
};

// Folds per-axis level lists into d-dimensional levels keyed exactly.
inline std::map<CycloKey, LevelAccumulator> compose_axes(const std::vector<std::vector<AxisLevel>>& axes,
                                                         const CyclotomicRing& ring) {
  std::map<CycloKey, LevelAccumulator> cur;
  cur.emplace(ring.zero(), LevelAccumulator{0.0, 0.0, 1.0, 1});
  for (const auto& axis : axes) {
    std::map<CycloKey, LevelAccumulator> next;
    for (const auto& [key, acc] : cur) {
      for (const auto& a : axis) {
        auto k = add_keys(key, a.key);
        auto it = next.find(k);
        if (it == next.end()) {
          next.emplace(std::move(k), LevelAccumulator{acc.eps + a.eps, acc.offset + a.offset, acc.weight * a.weight,
                                                      acc.modes * a.modes});
        } else {
          it->second.weight += acc.weight * a.weight;
          it->second.modes += acc.modes * a.modes;
        }
      }
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace detail

/// Distinct eigenvalues of the periodic adjacency, sum_i 2cos(2 pi k_i / L),
/// with exact multiplicities.
inline DispersionTable build_dispersion(const LatticeSpec& spec) {
  if (spec.boundary != Boundary::Periodic) throw ValidationError("dispersion is only defined for periodic lattices");
  if (spec.linear_size < 3) throw ValidationError("periodic lattices need L >= 3");
  const std::int64_t n = site_count(spec);
  const int L = spec.linear_size;

  detail::CyclotomicRing ring(L);
  std::vector<detail::AxisLevel> axis;
  for (int q = 0; 2 * q <= L; ++q) {
    const std::int64_t mult = (q == 0 || 2 * q == L) ? 1 : 2;
    const double theta = std::numbers::pi * q / L;
    axis.push_back({ring.two_cos(q), 2.0 * std::cos(2.0 * theta), 4.0 * std::sin(theta) * std::sin(theta),
                    static_cast<double>(mult), mult});
  }
  const auto levels =
      detail::compose_axes(std::vector<std::vector<detail::AxisLevel>>(static_cast<std::size_t>(spec.dimension), axis),
                           ring);

  DispersionTable table{spec.dimension, L, n, {}};
  table.levels.reserve(levels.size());
  for (const auto& [key, acc] : levels) table.levels.push_back({acc.eps, acc.offset, acc.modes, key});
  std::sort(table.levels.begin(), table.levels.end(), [](const DispersionLevel& a, const DispersionLevel& b) {
    if (a.offset != b.offset) return a.offset < b.offset;
    return a.key < b.key;
  });
  // The k = 0 mode is the only one with zero offset; pin its value exactly.
  table.levels.front().eps = 2.0 * spec.dimension;
  table.levels.front().offset = 0.0;
  return table;
}

// ---------------------------------------------------------------------------
// Sparse adjacency

/// Symmetric 0/1 nearest-neighbour adjacency in compressed-row form.
class SparseAdjacency {
 public:
  SparseAdjacency() = default;
  SparseAdjacency(std::int64_t sites, std::vector<std::int64_t> row_offsets, std::vector<std::int64_t> columns)
      : sites_(sites), row_offsets_(std::move(row_offsets)), columns_(std::move(columns)) {}

  std::int64_t site_count() const noexcept { return sites_; }
  std::int64_t edge_count() const noexcept { return static_cast<std::int64_t>(columns_.size()) / 2; }

  std::span<const std::int64_t> neighbors(std::int64_t site) const {
    const auto b = static_cast<std::size_t>(row_offsets_[static_cast<std::size_t>(site)]);
    const auto e = static_cast<std::size_t>(row_offsets_[static_cast<std::size_t>(site) + 1]);
    return {columns_.data() + b, e - b};
  }

  std::int64_t degree(std::int64_t site) const { return static_cast<std::int64_t>(neighbors(site).size()); }

  /// Undirected bonds (i, j) with i < j, sorted.
  std::vector<std::pair<std::int64_t, std::int64_t>> edges() const {
    std::vector<std::pair<std::int64_t, std::int64_t>> out;
    out.reserve(columns_.size() / 2);
    for (std::int64_t i = 0; i < sites_; ++i)
      for (auto j : neighbors(i))
        if (i < j) out.emplace_back(i, j);
    return out;
  }

  /// y = A x
  template <class Scalar>
  void apply(std::span<const Scalar> x, std::span<Scalar> y) const {
    for (std::int64_t i = 0; i < sites_; ++i) {
      Scalar acc{};
      for (auto j : neighbors(i)) acc += x[static_cast<std::size_t>(j)];
      y[static_cast<std::size_t>(i)] = acc;
    }
  }

 private:
  std::int64_t sites_ = 0;
  std::vector<std::int64_t> row_offsets_{0};
  std::vector<std::int64_t> columns_;
};

/// Nearest-neighbour adjacency of either boundary type. Periodic lattices
/// require L >= 3 so no bond is doubled.
inline SparseAdjacency build_adjacency(const LatticeSpec& spec) {
  validate(spec);
  const std::int64_t n = site_count(spec);
  const int L = spec.linear_size;
  const bool periodic = spec.boundary == Boundary::Periodic;
  std::vector<std::int64_t> offsets{0};
  std::vector<std::int64_t> cols;
  offsets.reserve(static_cast<std::size_t>(n) + 1);
  cols.reserve(static_cast<std::size_t>(n) * 2 * static_cast<std::size_t>(spec.dimension));
  std::vector<std::int64_t> stride(static_cast<std::size_t>(spec.dimension));
  {
    std::int64_t s = 1;
    for (int axis = spec.dimension - 1; axis >= 0; --axis) {
      stride[static_cast<std::size_t>(axis)] = s;
      s *= L;
    }
  }
  std::vector<std::int64_t> row;
  for (std::int64_t i = 0; i < n; ++i) {
    row.clear();
    const auto c = site_coordinates(spec, i);
    for (int axis = 0; axis < spec.dimension; ++axis) {
      const int ci = c[static_cast<std::size_t>(axis)];
      const std::int64_t st = stride[static_cast<std::size_t>(axis)];
      if (ci > 0) row.push_back(i - st);
      else if (periodic) row.push_back(i + (L - 1) * st);
      if (ci < L - 1) row.push_back(i + st);
      else if (periodic) row.push_back(i - (L - 1) * st);
    }
    std::sort(row.begin(), row.end());
    cols.insert(cols.end(), row.begin(), row.end());
    offsets.push_back(static_cast<std::int64_t>(cols.size()));
  }
  return SparseAdjacency(n, std::move(offsets), std::move(cols));
}

inline SparseAdjacency build_open_adjacency(const LatticeSpec& spec) {
  if (spec.boundary != Boundary::Open) throw ValidationError("build_open_adjacency needs an open-boundary spec");
  return build_adjacency(spec);
}

// ---------------------------------------------------------------------------
// Marked-site orbits of the open grid

struct MarkedSiteOrbit {
  std::int64_t representative;  // smallest site index in the orbit
  std::int64_t size;
  std::vector<int> folded;      // sorted min(c, L-1-c)
};

/// Orbits of the hyper-octahedral group (axis reflections and permutations)
/// acting on sites of the open grid, ordered by folded key.
inline std::vector<MarkedSiteOrbit> marked_site_orbits(const LatticeSpec& spec) {
  if (spec.boundary != Boundary::Open) throw ValidationError("marked-site orbits are defined for open lattices");
  const std::int64_t n = site_count(spec);
  const int L = spec.linear_size;
  std::map<std::vector<int>, MarkedSiteOrbit> orbits;
  for (std::int64_t i = 0; i < n; ++i) {
    auto c = site_coordinates(spec, i);
    for (auto& x : c) x = std::min(x, L - 1 - x);
    std::sort(c.begin(), c.end());
    auto it = orbits.find(c);
    if (it == orbits.end()) orbits.emplace(c, MarkedSiteOrbit{i, 1, c});
    else ++it->second.size;
  }
  std::vector<MarkedSiteOrbit> out;
  out.reserve(orbits.size());
  for (auto& [k, o] : orbits) out.push_back(std::move(o));
  return out;
}

inline std::vector<std::int64_t> marked_site_representatives(const LatticeSpec& spec) {
  std::vector<std::int64_t> reps;
  for (const auto& o : marked_site_orbits(spec)) reps.push_back(o.representative);
  return reps;
}

}  // namespace adia
