#pragma once

// Size sweeps with log-log power-law fits, and the spread of peak metrics
// over marked-site orbits of open grids.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "adia/errors.hpp"
#include "adia/lattice.hpp"
#include "adia/parallel.hpp"
#include "adia/schedule.hpp"
#include "adia/spectral.hpp"

namespace adia {

struct ScalingFit {
  double slope = 0.0;
  double intercept = 0.0;  // natural-log intercept: log y = intercept + slope log N
  double r2 = 0.0;
  std::size_t n_points = 0;
  std::vector<double> n;
  std::vector<double> y;
};

/// Ordinary least squares of log y against log N.
inline ScalingFit fit_power_law(std::span<const double> n, std::span<const double> y) {
  if (n.size() != y.size()) throw ValidationError("fit inputs differ in length");
  if (n.size() < 4) throw ValidationError(fmt::format("a fit needs at least 4 points, got {}", n.size()));
  const std::size_t m = n.size();
  std::vector<double> lx(m), ly(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!(n[i] > 0.0) || !(y[i] > 0.0) || !std::isfinite(n[i]) || !std::isfinite(y[i]))
      throw ValidationError(fmt::format("fit point ({}, {}) is not positive and finite", n[i], y[i]));
    lx[i] = std::log(n[i]);
    ly[i] = std::log(y[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx == 0.0) throw ValidationError("fit needs at least two distinct N");
  ScalingFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double r = ly[i] - (f.intercept + f.slope * lx[i]);
    ssr += r * r;
  }
  f.r2 = syy == 0.0 ? 1.0 : 1.0 - ssr / syy;
  f.n_points = m;
  f.n.assign(n.begin(), n.end());
  f.y.assign(y.begin(), y.end());
  return f;
}

enum class ScalingQuantity { TEstimate, TLae, TConst, MinGap, MaxV01, Width, Grover };

inline std::string_view to_string(ScalingQuantity q) {
  switch (q) {
    case ScalingQuantity::TEstimate: return "t_estimate";
    case ScalingQuantity::TLae: return "t_lae";
    case ScalingQuantity::TConst: return "t_const";
    case ScalingQuantity::MinGap: return "min_gap";
    case ScalingQuantity::MaxV01: return "max_v01";
    case ScalingQuantity::Width: return "width";
    case ScalingQuantity::Grover: return "grover";
  }
  return "?";
}

inline ScalingQuantity parse_quantity(std::string_view name) {
  for (auto q : {ScalingQuantity::TEstimate, ScalingQuantity::TLae, ScalingQuantity::TConst, ScalingQuantity::MinGap,
                 ScalingQuantity::MaxV01, ScalingQuantity::Width, ScalingQuantity::Grover})
    if (to_string(q) == name) return q;
  throw ValidationError(fmt::format("unknown quantity '{}'", name));
}

inline double select(const PeakSummary& p, ScalingQuantity q) {
  switch (q) {
    case ScalingQuantity::TEstimate:
    case ScalingQuantity::Grover: return p.t_estimate;
    case ScalingQuantity::TLae: return p.t_lae;
    case ScalingQuantity::TConst: return p.t_const;
    case ScalingQuantity::MinGap: return p.min_gap;
    case ScalingQuantity::MaxV01: return p.max_v01;
    case ScalingQuantity::Width: return p.width;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

/// Smallest L kept in the windowed fit; below it finite-size transients dominate.
inline int default_fit_floor(int dimension) {
  switch (dimension) {
    case 2: return 8;
    case 3: return 6;
    case 4: return 4;
    default: return 0;
  }
}

struct SizeResult {
  int linear_size = 0;
  std::int64_t site_count = 0;
  PeakSummary peak;
  IntegrandCurve curve;
  double value = 0.0;
};

struct ScalingOptions {
  GridConfig grid;
  int threads = 1;     // workers across sizes; each size samples with grid.threads
  int fit_floor = -1;  // -1 selects default_fit_floor(d)
  bool keep_curves = false;
};

struct ScalingReport {
  int dimension = 0;
  ScalingQuantity quantity = ScalingQuantity::TEstimate;
  std::vector<SizeResult> sizes;
  ScalingFit raw;
  std::optional<ScalingFit> windowed;  // L >= fit floor, when at least 4 sizes remain
  int fit_floor = 0;
};

/// Single-size pipeline: sample, summarise, select.
inline SizeResult run_size(int d, int L, const ModelParams& params, ScalingQuantity q, const GridConfig& grid,
                           bool keep_curve) {
  SizeResult r;
  r.linear_size = L;
  r.site_count = checked_site_count(d, L);
  if (q == ScalingQuantity::Grover) {
    r.curve = sample_integrand(grover_source(r.site_count), grid);
  } else {
    LatticeSpec spec{d, L, Boundary::Periodic, 0};
    r.curve = sample_integrand(periodic_source(spec, params), grid);
  }
  r.peak = summarize_peak(r.curve);
  r.value = select(r.peak, q);
  if (!keep_curve) r.curve.points.clear();
  r.curve.source = nullptr;
  return r;
}

inline ScalingReport fit_sizes(int d, ScalingQuantity q, std::vector<SizeResult> sizes, int fit_floor) {
  ScalingReport rep;
  rep.dimension = d;
  rep.quantity = q;
  rep.fit_floor = fit_floor < 0 ? default_fit_floor(d) : fit_floor;
  std::vector<double> n, y, wn, wy;
  for (const auto& s : sizes) {
    n.push_back(static_cast<double>(s.site_count));
    y.push_back(s.value);
    if (s.linear_size >= rep.fit_floor) {
      wn.push_back(n.back());
      wy.push_back(y.back());
    }
  }
  rep.raw = fit_power_law(n, y);
  if (wn.size() >= 4) rep.windowed = fit_power_law(wn, wy);
  rep.sizes = std::move(sizes);
  return rep;
}

/// Runs the integrand pipeline for every L (periodic lattice, or the Grover
/// model with N = L^d) and fits the selected quantity against N.
inline ScalingReport runtime_scaling(int d, const std::vector<int>& sizes, const ModelParams& params,
                                     ScalingQuantity q, const ScalingOptions& opts = {}) {
  validate(params);
  if (d < 1) throw ValidationError("dimension must be positive");
  if (sizes.size() < 4) throw ValidationError(fmt::format("a sweep needs at least 4 sizes, got {}", sizes.size()));
  for (std::size_t i = 1; i < sizes.size(); ++i)
    if (sizes[i] <= sizes[i - 1]) throw ValidationError("sizes must be strictly ascending");
  std::vector<SizeResult> results(sizes.size());
  parallel_for(sizes.size(), opts.threads, [&](std::size_t i) {
    try {
      results[i] = run_size(d, sizes[i], params, q, opts.grid, opts.keep_curves);
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("size L = {}: {}", sizes[i], e.what()));
    } catch (const std::exception& e) {
      throw NumericalError(fmt::format("size L = {}: {}", sizes[i], e.what()));
    }
  });
  return fit_sizes(d, q, std::move(results), opts.fit_floor);
}

// ---------------------------------------------------------------------------

struct OrbitResult {
  std::int64_t representative = 0;
  std::int64_t size = 0;
  std::vector<int> folded;
  double height = 0.0;
  double s_peak = 0.0;
};

struct SpreadReport {
  int dimension = 0;
  int linear_size = 0;
  std::size_t orbit_count = 0;
  double spread_height = 0.0;    // (max - min) / mean of H
  double spread_location = 0.0;  // same for s_peak
  double mean_height = 0.0;      // site-weighted means
  double mean_location = 0.0;
  std::vector<OrbitResult> orbits;
};

/// (max - min) / mean with the mean weighted by orbit size, which equals the
/// same statistic taken over every site of the grid.
inline double relative_spread(const std::vector<double>& v, const std::vector<double>& w, double* mean_out = nullptr) {
  double lo = v.front(), hi = v.front(), sw = 0.0, sv = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    lo = std::min(lo, v[i]);
    hi = std::max(hi, v[i]);
    sw += w[i];
    sv += w[i] * v[i];
  }
  const double mean = sv / sw;
  if (mean_out) *mean_out = mean;
  return (hi - lo) / mean;
}

inline SpreadReport spread_from_orbits(int d, int L, std::vector<OrbitResult> orbits) {
  SpreadReport rep;
  rep.dimension = d;
  rep.linear_size = L;
  rep.orbit_count = orbits.size();
  std::vector<double> h, loc, w;
  for (const auto& o : orbits) {
    h.push_back(o.height);
    loc.push_back(o.s_peak);
    w.push_back(static_cast<double>(o.size));
  }
  rep.spread_height = relative_spread(h, w, &rep.mean_height);
  rep.spread_location = relative_spread(loc, w, &rep.mean_location);
  rep.orbits = std::move(orbits);
  return rep;
}

/// Peak height and location for one representative per marked-site orbit of
/// the open d-dimensional grid of side L.
inline SpreadReport boundary_spread(int d, int L, const ModelParams& params, const GridConfig& grid = {},
                                    int threads = 1, const OpenSolveOptions& open_opts = sine_options()) {
  validate(params);
  if (L < 4) throw ValidationError(fmt::format("boundary spread needs L >= 4, got {}", L));
  LatticeSpec base{d, L, Boundary::Open, 0};
  validate(base);
  const auto orbits = marked_site_orbits(base);
  if (orbits.size() < 2) throw ValidationError("boundary spread needs at least two orbits");
  std::vector<OrbitResult> out(orbits.size());
  parallel_for(orbits.size(), threads, [&](std::size_t i) {
    LatticeSpec spec = base;
    spec.marked_site = orbits[i].representative;
    try {
      const auto curve = sample_integrand(open_source(spec, params, open_opts), grid);
      const auto peak = summarize_peak(curve);
      out[i] = {orbits[i].representative, orbits[i].size, orbits[i].folded, peak.height, peak.s_peak};
    } catch (const std::exception& e) {
      throw NumericalError(fmt::format("marked site {}: {}", orbits[i].representative, e.what()));
    }
  });
  return spread_from_orbits(d, L, std::move(out));
}

}  // namespace adia
