#pragma once

// Time-dependent Schroedinger evolution i d(psi)/d(tau) = H(s(tau)) psi from
// the s = 0 ground state, reporting the final marked-site probability.
//
// Integrator: fourth-order commutator-free Magnus scheme with two Gauss
// nodes per step. H is affine in s, so each of its two exponentials is
// exp(-i (h/2) H(s_bar)) at an effective parameter s_bar, applied with the
// Krylov propagator.

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "adia/errors.hpp"
#include "adia/krylov.hpp"
#include "adia/lattice.hpp"
#include "adia/parallel.hpp"
#include "adia/quadrature.hpp"
#include "adia/rank_one.hpp"
#include "adia/schedule.hpp"

namespace adia {

enum class ScheduleKind { ConstantRate, LAE };

enum class DynamicsBackend {
  Reduced,  // coupled-level basis: diagonal A plus the rank-one projector
  Site,     // site basis with the sparse adjacency
};

struct StepControl {
  double tolerance = 1e-6;  // step doubling stops once |dP0| falls below this
  std::int64_t initial_steps = 0;  // 0 picks max(16, ceil(T))
  std::int64_t max_steps = std::int64_t{1} << 22;
  double krylov_tolerance = 1e-13;
  double norm_tolerance = 1e-8;
};

struct EvolutionConfig {
  LatticeSpec spec;
  ModelParams params;
  double total_time = 0.0;
  ScheduleKind schedule = ScheduleKind::ConstantRate;
  std::shared_ptr<const ScheduleTable> lae;  // required for ScheduleKind::LAE
  StepControl steps;
  DynamicsBackend backend = DynamicsBackend::Reduced;
};

struct EvolutionResult {
  double final_overlap = 0.0;  // |<i*|psi(T)>|^2
  double norm_drift = 0.0;     // max over steps of | ||psi||^2 - 1 |
  std::int64_t steps = 0;
  double step_halving_delta = 0.0;  // |P0(steps) - P0(steps / 2)|
  double initial_energy = 0.0;      // <psi(0)|H(0)|psi(0)>
};

namespace detail {

using cvec = Eigen::VectorXcd;

// A Hamiltonian family H(s) = -(1-s) t A - s mu |i*><i*| in some basis.
struct Model {
  cvec initial;
  std::function<void(double, const cvec&, cvec&)> apply;  // y = H(s) x
  std::function<double(const cvec&)> marked_probability;
};

inline Model reduced_model(const LatticeSpec& spec, const ModelParams& p) {
  auto sp = std::make_shared<const CoupledSpectrum>(spec.boundary == Boundary::Periodic
                                                        ? coupled_spectrum(build_dispersion(spec))
                                                        : open_coupled_spectrum(spec));
  const auto n = static_cast<Eigen::Index>(sp->levels.size());
  Eigen::VectorXd eps(n), root_w(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    eps(j) = sp->levels[static_cast<std::size_t>(j)].eps;
    root_w(j) = std::sqrt(sp->levels[static_cast<std::size_t>(j)].weight);
  }
  const double scale = sp->weight_scale;
  const cvec v = (root_w / std::sqrt(scale)).cast<std::complex<double>>();
  const cvec ceps = eps.cast<std::complex<double>>();
  const cvec cw = root_w.cast<std::complex<double>>();
  Model m;
  // levels[0] is the top adjacency level, the s = 0 ground state.
  m.initial = cvec::Zero(n);
  m.initial(0) = 1.0;
  m.apply = [ceps, v, p](double s, const cvec& x, cvec& y) {
    const std::complex<double> proj = v.dot(x);
    y = (-(1.0 - s) * p.t) * ceps.cwiseProduct(x);
    y -= (s * p.mu) * proj * v;
  };
  // |<i*|psi>|^2 = |sum_j sqrt(W_j) psi_j|^2 / scale keeps P0(0) = 1/N exact.
  m.marked_probability = [cw, scale](const cvec& x) { return std::norm(cw.dot(x)) / scale; };
  return m;
}

inline Model site_model(const LatticeSpec& spec, const ModelParams& p) {
  auto adj = std::make_shared<const SparseAdjacency>(build_adjacency(spec));
  const std::int64_t n = adj->site_count();
  const auto marked = static_cast<Eigen::Index>(spec.marked_site);
  Model m;
  m.initial = cvec(static_cast<Eigen::Index>(n));
  if (spec.boundary == Boundary::Periodic) {
    m.initial.setConstant(1.0 / std::sqrt(static_cast<double>(n)));
  } else {
    // Top sine mode, the ground state of -A on the open grid.
    const int L = spec.linear_size;
    for (std::int64_t i = 0; i < n; ++i) {
      double a = 1.0;
      for (int c : site_coordinates(spec, i)) a *= detail::open_mode(L, 1, c);
      m.initial(static_cast<Eigen::Index>(i)) = a;
    }
  }
  m.apply = [adj, p, marked, n](double s, const cvec& x, cvec& y) {
    adj->apply<std::complex<double>>(std::span<const std::complex<double>>(x.data(), static_cast<std::size_t>(n)),
                                     std::span<std::complex<double>>(y.data(), static_cast<std::size_t>(n)));
    y *= -(1.0 - s) * p.t;
    y(marked) -= s * p.mu * x(marked);
  };
  m.marked_probability = [marked](const cvec& x) { return std::norm(x(marked)); };
  return m;
}

struct Run {
  double p0;
  double drift;
};

inline Run run_fixed(const Model& m, const std::function<double(double)>& s_of_tau, double total, std::int64_t steps,
                     double krylov_tol) {
  static const double sqrt3 = std::sqrt(3.0);
  const double c1 = 0.5 - sqrt3 / 6.0, c2 = 0.5 + sqrt3 / 6.0;
  const double a1 = (3.0 - 2.0 * sqrt3) / 12.0, a2 = (3.0 + 2.0 * sqrt3) / 12.0;
  const double h = total / static_cast<double>(steps);
  cvec psi = m.initial;
  double drift = 0.0;
  for (std::int64_t k = 0; k < steps; ++k) {
    const double t0 = h * static_cast<double>(k);
    const double s1 = s_of_tau(t0 + c1 * h), s2 = s_of_tau(t0 + c2 * h);
    const double first = 2.0 * (a2 * s1 + a1 * s2);
    const double second = 2.0 * (a1 * s1 + a2 * s2);
    krylov_propagate([&](const cvec& x, cvec& y) { m.apply(first, x, y); }, psi, 0.5 * h, krylov_tol);
    krylov_propagate([&](const cvec& x, cvec& y) { m.apply(second, x, y); }, psi, 0.5 * h, krylov_tol);
    drift = std::max(drift, std::abs(psi.squaredNorm() - 1.0));
  }
  return {m.marked_probability(psi), drift};
}

}  // namespace detail

/// Evolves the s = 0 ground state to tau = T and measures |<i*|psi>|^2.
/// The step count doubles until successive results agree to
/// steps.tolerance.
inline EvolutionResult evolve(const EvolutionConfig& cfg) {
  validate(cfg.spec);
  validate(cfg.params);
  if (!(cfg.total_time >= 0.0) || !std::isfinite(cfg.total_time))
    throw ValidationError(fmt::format("total time {} must be finite and non-negative", cfg.total_time));
  if (cfg.steps.max_steps < 1 || cfg.steps.initial_steps < 0 || !(cfg.steps.tolerance > 0.0))
    throw ValidationError("invalid step control");
  if (cfg.spec.boundary == Boundary::Open && cfg.spec.linear_size < 2)
    throw ValidationError("open lattices need L >= 2");

  const detail::Model model = cfg.backend == DynamicsBackend::Reduced ? detail::reduced_model(cfg.spec, cfg.params)
                                                                      : detail::site_model(cfg.spec, cfg.params);
  EvolutionResult res;
  {
    detail::cvec y(model.initial.size());
    model.apply(0.0, model.initial, y);
    res.initial_energy = model.initial.dot(y).real();
  }
  if (cfg.total_time == 0.0) {
    res.final_overlap = model.marked_probability(model.initial);
    return res;
  }

  const double T = cfg.total_time;
  std::function<double(double)> s_of_tau;
  if (cfg.schedule == ScheduleKind::ConstantRate) {
    s_of_tau = [T](double tau) { return tau / T; };
  } else {
    if (!cfg.lae || cfg.lae->s.size() < 2) throw ValidationError("LAE evolution needs a schedule table");
    auto inverse = std::make_shared<const MonotoneCubic>(cfg.lae->tau, cfg.lae->s);
    const double stretch = cfg.lae->total() / T;
    s_of_tau = [inverse, stretch](double tau) { return std::clamp((*inverse)(tau * stretch), 0.0, 1.0); };
  }

  std::int64_t n = cfg.steps.initial_steps > 0 ? cfg.steps.initial_steps
                                               : std::max<std::int64_t>(16, static_cast<std::int64_t>(std::ceil(T)));
  n = std::min(n, cfg.steps.max_steps);
  auto prev = detail::run_fixed(model, s_of_tau, T, n, cfg.steps.krylov_tolerance);
  for (;;) {
    if (2 * n > cfg.steps.max_steps)
      throw NumericalError(fmt::format("step control failed at T = {}: |dP0| did not fall below {} by {} steps", T,
                                       cfg.steps.tolerance, n));
    const auto cur = detail::run_fixed(model, s_of_tau, T, 2 * n, cfg.steps.krylov_tolerance);
    n *= 2;
    const double delta = std::abs(cur.p0 - prev.p0);
    prev = cur;
    if (delta <= cfg.steps.tolerance) {
      res.step_halving_delta = delta;
      break;
    }
  }
  res.final_overlap = prev.p0;
  res.norm_drift = prev.drift;
  res.steps = n;
  if (res.norm_drift > cfg.steps.norm_tolerance)
    throw NumericalError(fmt::format("norm drift {:.3e} exceeds {:.1e} at T = {} with {} steps", res.norm_drift,
                                     cfg.steps.norm_tolerance, T, n));
  return res;
}

struct SweepEntry {
  double total_time = 0.0;
  std::optional<EvolutionResult> result;
  std::string error;  // set when result is empty
};

/// Independent evolutions for each T; a failing entry records its error
/// and the sweep continues.
inline std::vector<SweepEntry> sweep_runtime(const EvolutionConfig& base, const std::vector<double>& times,
                                             int threads = 1) {
  if (times.empty()) throw ValidationError("runtime list is empty");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (times[i] < times[i - 1]) throw ValidationError("runtime list must be ascending");
  std::vector<SweepEntry> out(times.size());
  parallel_for(times.size(), threads, [&](std::size_t i) {
    out[i].total_time = times[i];
    EvolutionConfig cfg = base;
    cfg.total_time = times[i];
    try {
      out[i].result = evolve(cfg);
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
  });
  return out;
}

}  // namespace adia
