#pragma once

// H(s) = -(1-s) t A - s mu |i*><i*| restricted to the cyclic subspace
// generated by |i*> under A. On that subspace A has simple spectrum: one
// "coupled level" per distinct eigenvalue eps_j whose eigenspace overlaps
// |i*>, with weight W_j = |P_j |i*>|^2. The marked-site projector is then a
// rank-one update of a diagonal operator and both lowest eigenpairs follow
// from the secular equation
//
//     s mu sum_j W_j / (lambda_j - E) = 1,   lambda_j = -(1-s) t eps_j.
//
// Everything is expressed relative to the top level: offsets
// delta_j = eps_max - eps_j are supplied by the caller in cancellation-free
// form and roots are solved for x = E - lambda_min, which keeps full relative
// precision on the gap when it becomes small.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include <fmt/format.h>

#include "adia/cyclotomic.hpp"
#include "adia/errors.hpp"
#include "adia/lattice.hpp"

namespace adia {

struct CoupledLevel {
  double eps;     // eigenvalue of A
  double offset;  // eps_max - eps >= 0
  double weight;  // overlap weight, scaled by CoupledSpectrum::weight_scale
  detail::CycloKey key;
};

struct CoupledSpectrum {
  int dimension = 0;
  std::int64_t site_count = 0;
  double eps_max = 0.0;
  // Weights are stored multiplied by this scale: N for periodic lattices
  // (weights are then the integer multiplicities), 1 otherwise.
  double weight_scale = 1.0;
  std::vector<CoupledLevel> levels;  // ascending offset; levels[0].offset == 0

  double amplitude(std::size_t j) const { return std::sqrt(levels[j].weight / weight_scale); }
};

inline CoupledSpectrum coupled_spectrum(const DispersionTable& table) {
  CoupledSpectrum sp;
  sp.dimension = table.dimension;
  sp.site_count = table.site_count;
  sp.eps_max = 2.0 * table.dimension;
  sp.weight_scale = static_cast<double>(table.site_count);
  sp.levels.reserve(table.levels.size());
  for (const auto& l : table.levels) sp.levels.push_back({l.eps, l.offset, static_cast<double>(l.multiplicity), l.key});
  return sp;
}

namespace detail {

// 1D open chain: phi_q(c) = sqrt(2/(L+1)) sin(pi q (c+1)/(L+1)), eigenvalue
// 2cos(pi q/(L+1)), q = 1..L.
inline double open_mode(int L, int q, int c) {
  return std::sqrt(2.0 / (L + 1)) * std::sin(std::numbers::pi * q * (c + 1) / (L + 1));
}

inline std::vector<AxisLevel> open_axis_levels(int L, int marked_coord, const CyclotomicRing& ring) {
  std::vector<AxisLevel> axis;
  axis.reserve(static_cast<std::size_t>(L));
  const double h = std::numbers::pi / (2.0 * (L + 1));
  for (int q = 1; q <= L; ++q) {
    const double amp = open_mode(L, q, marked_coord);
    // Exact zero when the marked coordinate sits on a node of the mode.
    const double w = (q * (marked_coord + 1)) % (L + 1) == 0 ? 0.0 : amp * amp;
    axis.push_back({ring.two_cos(q), 2.0 * std::cos(2.0 * h * q), 4.0 * std::sin(h * (q - 1)) * std::sin(h * (q + 1)),
                    w, 1});
  }
  return axis;
}

}  // namespace detail

/// Coupled spectrum of the open grid seen from spec.marked_site, built from
/// the separable sine eigenbasis. Levels orthogonal to the marked site are
/// dropped.
inline CoupledSpectrum open_coupled_spectrum(const LatticeSpec& spec) {
  if (spec.boundary != Boundary::Open) throw ValidationError("open_coupled_spectrum needs an open-boundary spec");
  validate(spec);
  const int L = spec.linear_size;
  detail::CyclotomicRing ring(2 * (L + 1));
  const auto coords = site_coordinates(spec, spec.marked_site);
  std::vector<std::vector<detail::AxisLevel>> axes;
  for (int c : coords) axes.push_back(detail::open_axis_levels(L, c, ring));
  const auto levels = detail::compose_axes(axes, ring);

  CoupledSpectrum sp;
  sp.dimension = spec.dimension;
  sp.site_count = site_count(spec);
  sp.weight_scale = 1.0;
  for (const auto& [key, acc] : levels)
    if (acc.weight > 0.0) sp.levels.push_back({acc.eps, acc.offset, acc.weight, key});
  std::sort(sp.levels.begin(), sp.levels.end(), [](const CoupledLevel& a, const CoupledLevel& b) {
    if (a.offset != b.offset) return a.offset < b.offset;
    return a.key < b.key;
  });
  sp.levels.front().offset = 0.0;
  sp.eps_max = sp.levels.front().eps;
  return sp;
}

/// Coupled spectrum from a numerically diagonalised operator. eigenvalues are
/// ascending-order eigenvalues of A restricted to some invariant subspace,
/// overlaps the components of |i*> in the matching eigenvectors. Eigenvalues
/// closer than cluster_tol are merged; clusters with weight below
/// min_weight are treated as decoupled. Returns, per level, the indices of
/// the eigenvectors it merges.
inline CoupledSpectrum coupled_spectrum_from_eigensystem(std::span<const double> eigenvalues,
                                                         std::span<const double> overlaps, int dimension,
                                                         std::int64_t sites,
                                                         std::vector<std::vector<std::size_t>>* members = nullptr,
                                                         double cluster_tol = 1e-10, double min_weight = 1e-20) {
  const std::size_t n = eigenvalues.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return eigenvalues[a] > eigenvalues[b]; });

  CoupledSpectrum sp;
  sp.dimension = dimension;
  sp.site_count = sites;
  sp.weight_scale = 1.0;
  if (members) members->clear();
  std::size_t i = 0;
  double top = 0.0;
  bool have_top = false;
  while (i < n) {
    std::size_t j = i;
    double w = 0.0;
    std::vector<std::size_t> cluster;
    const double head = eigenvalues[order[i]];
    while (j < n && head - eigenvalues[order[j]] <= cluster_tol * std::max(1.0, std::abs(head))) {
      w += overlaps[order[j]] * overlaps[order[j]];
      cluster.push_back(order[j]);
      ++j;
    }
    if (w > min_weight) {
      double eps = 0.0;
      for (auto k : cluster) eps += eigenvalues[k];
      eps /= static_cast<double>(cluster.size());
      if (!have_top) {
        top = eps;
        have_top = true;
      }
      sp.levels.push_back({eps, top - eps, w, {}});
      if (members) members->push_back(std::move(cluster));
    }
    i = j;
  }
  if (sp.levels.empty()) throw NumericalError("eigensystem has no component along the marked site");
  sp.eps_max = top;
  return sp;
}

// ---------------------------------------------------------------------------
// Secular solve

struct SecularSolution {
  double s = 0.0;
  double e0 = 0.0;
  double e1 = 0.0;
  double gap = 0.0;
  std::vector<double> ground;   // coefficients on normalised level states
  std::vector<double> excited;
  double residual = 0.0;        // normalised secular residual, max over both roots
};

namespace detail {

// Root of an increasing function on the open interval (lo, hi). Bisection to
// full relative precision, then a guarded Newton polish.
template <class F, class DF>
double increasing_root(F&& f, DF&& df, double lo, double hi, int max_iter = 2000) {
  int it = 0;
  for (; it < max_iter; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (!(mid > lo && mid < hi)) break;
    const double v = f(mid);
    if (v < 0.0) lo = mid;
    else if (v > 0.0) hi = mid;
    else return mid;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi))) break;
  }
  if (it == max_iter) throw NumericalError("secular root bisection did not converge");
  double x = lo + 0.5 * (hi - lo);
  double fx = f(x);
  for (int k = 0; k < 3 && fx != 0.0; ++k) {
    const double xn = x - fx / df(x);
    if (!(xn > lo && xn < hi)) break;
    const double fn = f(xn);
    if (!(std::abs(fn) < std::abs(fx))) break;
    x = xn;
    fx = fn;
  }
  return x;
}

}  // namespace detail

/// Two lowest eigenpairs of H(s) in the marked-site sector.
inline SecularSolution solve_secular(const CoupledSpectrum& sp, const ModelParams& p, double s) {
  validate(p);
  if (!(s >= 0.0 && s <= 1.0)) throw ValidationError(fmt::format("s = {} outside [0, 1]", s));
  const std::size_t n = sp.levels.size();
  if (n < 2) throw NumericalError("secular solve needs at least two coupled levels");

  std::vector<double> amp(n);
  for (std::size_t j = 0; j < n; ++j) amp[j] = sp.amplitude(j);

  SecularSolution out;
  out.s = s;
  out.ground.assign(n, 0.0);
  out.excited.assign(n, 0.0);

  auto normalise = [](std::vector<double>& v) {
    double nn = 0.0;
    for (double x : v) nn += x * x;
    const double inv = 1.0 / std::sqrt(nn);
    for (double& x : v) x *= inv;
  };

  if (s == 0.0) {
    out.e0 = -p.t * sp.eps_max;
    out.gap = p.t * sp.levels[1].offset;
    out.e1 = out.e0 + out.gap;
    out.ground[0] = 1.0;
    out.excited[1] = 1.0;
    return out;
  }

  if (s == 1.0) {
    // Ground state is |i*>; the excited state is the s -> 1 limit, the lowest
    // state of -tA on the complement of |i*> within the sector:
    // sum_j W_j / (t delta_j - y) = 0 with y in (0, t delta_1).
    out.e0 = -p.mu;
    out.e1 = 0.0;
    out.gap = p.mu;
    out.ground = amp;
    auto f = [&](double y) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += sp.levels[j].weight / (p.t * sp.levels[j].offset - y);
      return acc;
    };
    auto df = [&](double y) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double d = p.t * sp.levels[j].offset - y;
        acc += sp.levels[j].weight / (d * d);
      }
      return acc;
    };
    const double y = detail::increasing_root(f, df, 0.0, p.t * sp.levels[1].offset);
    for (std::size_t j = 0; j < n; ++j) out.excited[j] = amp[j] / (p.t * sp.levels[j].offset - y);
    normalise(out.excited);
    out.residual = std::abs(f(y)) / (std::abs(y) * df(y));
    return out;
  }

  const double kappa = (1.0 - s) * p.t;
  const double sigma = s * p.mu / sp.weight_scale;
  auto pole = [&](std::size_t j) { return kappa * sp.levels[j].offset; };
  auto secular = [&](double x) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += sp.levels[j].weight / (pole(j) - x);
    return sigma * acc - 1.0;
  };
  auto dsecular = [&](double x) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = pole(j) - x;
      acc += sp.levels[j].weight / (d * d);
    }
    return sigma * acc;
  };
  auto residual = [&](double x) { return std::abs(secular(x)) / std::max(1.0, std::abs(x) * dsecular(x)); };

  // Weyl: E0 >= lambda_min - s mu, so secular(-s mu) <= 0.
  const double x0 = detail::increasing_root(secular, dsecular, -s * p.mu * (1.0 + 1e-12) - 1e-300, 0.0);
  const double x1 = detail::increasing_root(secular, dsecular, 0.0, pole(1));
  if (!(x0 < 0.0 && x1 > 0.0 && x1 < pole(1))) throw NumericalError("secular roots escaped their brackets");

  const double lambda_min = -kappa * sp.eps_max;
  out.e0 = lambda_min + x0;
  out.e1 = lambda_min + x1;
  out.gap = x1 - x0;
  for (std::size_t j = 0; j < n; ++j) {
    out.ground[j] = amp[j] / (pole(j) - x0);
    out.excited[j] = amp[j] / (pole(j) - x1);
  }
  normalise(out.ground);
  normalise(out.excited);
  out.residual = std::max(residual(x0), residual(x1));
  return out;
}

/// |<0| (tA - mu P) |1>| from level coefficients.
inline double coupled_matrix_element(const CoupledSpectrum& sp, const ModelParams& p, std::span<const double> c0,
                                     std::span<const double> c1) {
  // <0|1> = 0, so <0|A|1> = -sum_j delta_j c0_j c1_j exactly.
  double a01 = 0.0, g = 0.0, e = 0.0;
  for (std::size_t j = 0; j < sp.levels.size(); ++j) {
    a01 -= sp.levels[j].offset * c0[j] * c1[j];
    const double amp = sp.amplitude(j);
    g += amp * c0[j];
    e += amp * c1[j];
  }
  return std::abs(p.t * a01 - p.mu * g * e);
}

}  // namespace adia
