#pragma once

// The local-adiabatic integrand f(s) = V01(s) / g(s)^2: adaptive sampling,
// peak metrics, the runtime integral and the schedule tau(s).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include <fmt/format.h>

#include "adia/errors.hpp"
#include "adia/lattice.hpp"
#include "adia/parallel.hpp"
#include "adia/quadrature.hpp"
#include "adia/spectral.hpp"

namespace adia {

struct GridConfig {
  int base_points = 257;
  double refine_ratio = 1.2;   // split an interval when neighbour values differ by more than this factor
  int max_depth = 14;          // halvings of a base interval
  int min_peak_points = 32;    // samples required inside the half-height interval
  double quad_tolerance = 1e-4;
  int threads = 1;
};

inline void validate(const GridConfig& g) {
  if (g.base_points < 64) throw ValidationError(fmt::format("base grid of {} points is below 64", g.base_points));
  if (!(g.refine_ratio > 1.0)) throw ValidationError("refinement ratio must exceed 1");
  if (g.max_depth < 0 || g.max_depth > 40) throw ValidationError("refinement depth must lie in [0, 40]");
  if (g.min_peak_points < 0) throw ValidationError("minimum peak point count is negative");
  if (!(g.quad_tolerance > 0.0 && g.quad_tolerance < 1.0)) throw ValidationError("quadrature tolerance must lie in (0, 1)");
}

struct IntegrandCurve {
  std::vector<SpectralPoint> points;  // strictly increasing s
  GridConfig grid;
  int depth_reached = 0;
  SpectralFunction source;  // empty for curves built from stored samples

  bool has_degenerate() const {
    return std::any_of(points.begin(), points.end(), [](const SpectralPoint& p) { return p.degenerate; });
  }
};

/// Evaluates the curve between samples: the underlying source when present,
/// otherwise monotone cubic interpolation of the stored columns.
inline SpectralFunction curve_evaluator(const IntegrandCurve& curve) {
  if (curve.source) return curve.source;
  std::vector<double> s, f, v, g, e0;
  for (const auto& p : curve.points) {
    s.push_back(p.s);
    f.push_back(p.integrand);
    v.push_back(p.v01);
    g.push_back(p.gap);
    e0.push_back(p.e0);
  }
  auto fi = std::make_shared<const MonotoneCubic>(s, f);
  auto vi = std::make_shared<const MonotoneCubic>(s, v);
  auto gi = std::make_shared<const MonotoneCubic>(s, g);
  auto ei = std::make_shared<const MonotoneCubic>(s, e0);
  return [fi, vi, gi, ei](double x) {
    SpectralPoint p;
    p.s = x;
    p.e0 = (*ei)(x);
    p.gap = (*gi)(x);
    p.e1 = p.e0 + p.gap;
    p.v01 = (*vi)(x);
    p.integrand = (*fi)(x);
    return p;
  };
}

namespace detail {

inline std::vector<SpectralPoint> evaluate_all(const SpectralFunction& f, const std::vector<double>& s, int threads) {
  std::vector<SpectralPoint> out(s.size());
  parallel_for(s.size(), threads, [&](std::size_t i) { out[i] = f(s[i]); });
  return out;
}

// Index of the largest finite integrand sample, or npos.
inline std::size_t sampled_argmax(const std::vector<SpectralPoint>& pts) {
  std::size_t k = std::numeric_limits<std::size_t>::max();
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (std::isfinite(pts[i].integrand) && (k == std::numeric_limits<std::size_t>::max() || pts[i].integrand > pts[k].integrand))
      k = i;
  return k;
}

}  // namespace detail

/// Samples f on a uniform base grid, bisects intervals whose neighbour ratio
/// exceeds grid.refine_ratio, then densifies the half-height interval.
inline IntegrandCurve sample_integrand(SpectralFunction source, const GridConfig& grid = {}) {
  validate(grid);
  IntegrandCurve curve;
  curve.grid = grid;
  curve.source = std::move(source);

  const auto nb = static_cast<std::size_t>(grid.base_points);
  std::vector<double> s(nb);
  for (std::size_t i = 0; i < nb; ++i) s[i] = static_cast<double>(i) / static_cast<double>(nb - 1);
  auto pts = detail::evaluate_all(curve.source, s, grid.threads);
  // An exactly degenerate endpoint is replaced by a point just inside it.
  if (pts.front().degenerate) pts.front() = curve.source(1e-9);
  if (pts.back().degenerate) pts.back() = curve.source(1.0 - 1e-9);
  std::vector<int> depth(nb - 1, 0);  // depth of interval [i, i+1]

  auto needs_split = [&](std::size_t i) {
    const double a = pts[i].integrand, b = pts[i + 1].integrand;
    if (!std::isfinite(a) || !std::isfinite(b) || a <= 0.0 || b <= 0.0) return false;
    return std::max(a, b) > grid.refine_ratio * std::min(a, b);
  };

  // Bisects the marked intervals, evaluating all new midpoints in one batch.
  auto split = [&](const std::vector<char>& mark) {
    std::vector<double> mids;
    for (std::size_t i = 0; i < mark.size(); ++i)
      if (mark[i]) mids.push_back(0.5 * (pts[i].s + pts[i + 1].s));
    if (mids.empty()) return false;
    auto fresh = detail::evaluate_all(curve.source, mids, grid.threads);
    std::vector<SpectralPoint> np;
    std::vector<int> nd;
    np.reserve(pts.size() + fresh.size());
    std::size_t m = 0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      np.push_back(pts[i]);
      if (mark[i]) {
        np.push_back(fresh[m++]);
        nd.push_back(depth[i] + 1);
        nd.push_back(depth[i] + 1);
        curve.depth_reached = std::max(curve.depth_reached, depth[i] + 1);
      } else {
        nd.push_back(depth[i]);
      }
    }
    np.push_back(pts.back());
    pts = std::move(np);
    depth = std::move(nd);
    return true;
  };

  for (;;) {
    std::vector<char> mark(pts.size() - 1, 0);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) mark[i] = depth[i] < grid.max_depth && needs_split(i);
    if (!split(mark)) break;
  }

  // Guarantee min_peak_points samples above half height. The 2% margin
  // covers the difference between the sampled and the refined maximum.
  for (int pass = 0; pass < 40; ++pass) {
    const std::size_t k = detail::sampled_argmax(pts);
    if (k == std::numeric_limits<std::size_t>::max() || k == 0 || k + 1 == pts.size()) break;
    const double half = 0.5 * pts[k].integrand * 1.02;
    std::size_t lo = k, hi = k;
    while (lo > 0 && pts[lo - 1].integrand >= half) --lo;
    while (hi + 1 < pts.size() && pts[hi + 1].integrand >= half) ++hi;
    if (lo == 0 || hi + 1 == pts.size()) break;
    if (static_cast<int>(hi - lo + 1) >= grid.min_peak_points) break;
    std::vector<char> mark(pts.size() - 1, 0);
    for (std::size_t i = lo - 1; i <= hi; ++i) mark[i] = 1;
    split(mark);
  }
  curve.points = std::move(pts);
  return curve;
}

inline IntegrandCurve sample_integrand(const LatticeSpec& spec, const ModelParams& params, const GridConfig& grid = {},
                                       const OpenSolveOptions& open_opts = sine_options()) {
  return sample_integrand(lattice_source(spec, params, open_opts), grid);
}

/// Curve assembled from stored samples (no underlying source).
inline IntegrandCurve curve_from_samples(std::vector<SpectralPoint> points, const GridConfig& grid = {}) {
  if (points.size() < 3) throw ValidationError("a curve needs at least three samples");
  for (std::size_t i = 1; i < points.size(); ++i)
    if (!(points[i].s > points[i - 1].s)) throw ValidationError("curve samples must have strictly increasing s");
  if (points.front().s < 0.0 || points.back().s > 1.0) throw ValidationError("curve samples must lie in [0, 1]");
  IntegrandCurve c;
  c.points = std::move(points);
  c.grid = grid;
  return c;
}

// ---------------------------------------------------------------------------

struct PeakSummary {
  double height = 0.0;     // H = max_s f
  double s_peak = 0.0;
  double s_minus = 0.0;    // f(s_minus) = f(s_plus) = H / 2
  double s_plus = 0.0;
  double width = 0.0;      // W = s_plus - s_minus
  double t_estimate = 0.0; // H * W
  double t_lae = 0.0;      // integral of f over the sampled range
  double t_lae_error = 0.0;
  double t_const = 0.0;    // max V01 / min g^2
  double max_v01 = 0.0;
  double s_max_v01 = 0.0;
  double min_gap = 0.0;
  double s_min_gap = 0.0;
  std::size_t peak_points = 0;  // samples inside [s_minus, s_plus]
  bool bounds_hold = false;     // t_estimate <= t_lae <= t_const
};

namespace detail {

// Integral of f over the curve's sample intervals, each handled by adaptive
// Simpson with a tolerance proportional to its width.
inline QuadratureResult integrate_curve(const IntegrandCurve& curve, const SpectralFunction& eval, double rel_tol) {
  const auto& p = curve.points;
  double trap = 0.0;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) trap += 0.5 * (p[i + 1].s - p[i].s) * (p[i].integrand + p[i + 1].integrand);
  const double span = p.back().s - p.front().s;
  auto f = [&](double x) { return eval(x).integrand; };
  QuadratureResult total;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    const double tol = rel_tol * trap * (p[i + 1].s - p[i].s) / span;
    const auto r = adaptive_simpson(f, p[i].s, p[i + 1].s, p[i].integrand, p[i + 1].integrand, tol);
    total.value += r.value;
    total.error += r.error;
    total.evaluations += r.evaluations;
  }
  return total;
}

}  // namespace detail

/// Peak height, half-height width and runtime measures of a single-peaked
/// curve. Throws MultiModalError when f crosses H/2 more than twice.
inline PeakSummary summarize_peak(const IntegrandCurve& curve) {
  const auto& p = curve.points;
  if (p.size() < 3) throw ValidationError("a curve needs at least three samples");
  for (const auto& q : p) {
    if (q.degenerate) throw NumericalError(fmt::format("degenerate gap at s = {}", q.s));
    if (!std::isfinite(q.integrand)) throw NumericalError(fmt::format("non-finite integrand at s = {}", q.s));
  }
  const auto eval = curve_evaluator(curve);
  auto f = [&](double x) { return eval(x).integrand; };

  const std::size_t k = detail::sampled_argmax(p);
  if (k == 0 || k + 1 == p.size())
    throw NumericalError(fmt::format("integrand maximum lies at the endpoint s = {}", p[k].s));

  PeakSummary out;
  const auto top = golden_section_max(f, p[k - 1].s, p[k + 1].s);
  out.height = top.value;
  out.s_peak = top.x;
  if (p[k].integrand > out.height) {
    out.height = p[k].integrand;
    out.s_peak = p[k].s;
  }

  // Half-height crossings, each bracketed by a sign change between samples.
  const double half = 0.5 * out.height;
  auto g = [&](double x) { return f(x) - half; };
  std::vector<double> crossings;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    const double a = p[i].integrand - half, b = p[i + 1].integrand - half;
    if ((a < 0.0) != (b < 0.0)) crossings.push_back(bisect(g, p[i].s, p[i + 1].s, a));
  }
  if (crossings.size() > 2) {
    std::string list;
    for (double c : crossings) list += fmt::format("{}{:.6g}", list.empty() ? "" : ", ", c);
    throw MultiModalError(fmt::format("integrand crosses half height {} times (s = {})", crossings.size(), list),
                          crossings);
  }
  if (crossings.size() < 2 || !(crossings[0] < out.s_peak && crossings[1] > out.s_peak))
    throw NumericalError("integrand has no half-height crossing on both sides of its peak");
  out.s_minus = crossings[0];
  out.s_plus = crossings[1];
  out.width = out.s_plus - out.s_minus;
  out.t_estimate = out.height * out.width;
  out.peak_points = static_cast<std::size_t>(std::count_if(
      p.begin(), p.end(), [&](const SpectralPoint& q) { return q.s >= out.s_minus && q.s <= out.s_plus; }));

  const auto quad = detail::integrate_curve(curve, eval, curve.grid.quad_tolerance);
  out.t_lae = quad.value;
  out.t_lae_error = quad.error;

  // Extremes of V01 and g, refined between the neighbours of the sampled extreme.
  std::size_t kv = 0, kg = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i].v01 > p[kv].v01) kv = i;
    if (p[i].gap < p[kg].gap) kg = i;
  }
  auto lo = [&](std::size_t i) { return p[i == 0 ? 0 : i - 1].s; };
  auto hi = [&](std::size_t i) { return p[std::min(i + 1, p.size() - 1)].s; };
  const auto vmax = golden_section_max([&](double x) { return eval(x).v01; }, lo(kv), hi(kv));
  const auto gmin = golden_section_min([&](double x) { return eval(x).gap; }, lo(kg), hi(kg));
  out.max_v01 = std::max(vmax.value, p[kv].v01);
  out.s_max_v01 = vmax.value >= p[kv].v01 ? vmax.x : p[kv].s;
  out.min_gap = std::min(gmin.value, p[kg].gap);
  out.s_min_gap = gmin.value <= p[kg].gap ? gmin.x : p[kg].s;
  out.t_const = out.max_v01 / (out.min_gap * out.min_gap);
  out.bounds_hold = out.t_estimate <= out.t_lae + out.t_lae_error && out.t_lae <= out.t_const + out.t_lae_error;
  return out;
}

// ---------------------------------------------------------------------------

struct ScheduleTable {
  std::vector<double> s;
  std::vector<double> tau;   // tau[0] = 0, strictly increasing
  std::vector<double> rate;  // (1/epsilon) f(s) at each sample
  double epsilon = 1.0;
  double error = 0.0;        // accumulated quadrature error estimate on tau

  double total() const { return tau.empty() ? 0.0 : tau.back(); }
};

/// tau(s) = (1/epsilon) int_0^s f. Sample intervals are split until the mean
/// slope on every interval is at least the rate at its midpoint, to within
/// the quadrature tolerance.
inline ScheduleTable build_lae_schedule(const IntegrandCurve& curve, const ModelParams& params) {
  validate(params);
  const auto& p = curve.points;
  if (p.size() < 2) throw ValidationError("a curve needs at least two samples");
  for (const auto& q : p)
    if (q.degenerate || !std::isfinite(q.integrand) || !(q.integrand > 0.0))
      throw NumericalError(fmt::format("integrand at s = {} is not usable for a schedule", q.s));

  const auto eval = curve_evaluator(curve);
  auto f = [&](double x) { return eval(x).integrand; };
  const double tol = curve.grid.quad_tolerance;
  double trap = 0.0;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) trap += 0.5 * (p[i + 1].s - p[i].s) * (p[i].integrand + p[i + 1].integrand);
  const double span = p.back().s - p.front().s;

  ScheduleTable out;
  out.epsilon = params.epsilon;
  const double inv = 1.0 / params.epsilon;
  double acc = 0.0;
  out.s.push_back(p.front().s);
  out.tau.push_back(0.0);
  out.rate.push_back(inv * p.front().integrand);

  std::function<void(double, double, double, double, int)> piece = [&](double a, double b, double fa, double fb,
                                                                      int depth) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    const auto r = adaptive_simpson(f, a, b, fa, fb, tol * trap * (b - a) / span);
    if (depth < 30 && r.value < (b - a) * fm * (1.0 - tol) && m > a && m < b) {
      piece(a, m, fa, fm, depth + 1);
      piece(m, b, fm, fb, depth + 1);
      return;
    }
    acc += r.value;
    out.error += inv * r.error;
    out.s.push_back(b);
    out.tau.push_back(inv * acc);
    out.rate.push_back(inv * fb);
  };
  for (std::size_t i = 0; i + 1 < p.size(); ++i) piece(p[i].s, p[i + 1].s, p[i].integrand, p[i + 1].integrand, 0);
  return out;
}

}  // namespace adia
