#pragma once

// Ground and first excited states of H(s) = -(1-s) t A - s mu |i*><i*| and
// the transition matrix element V01 = |<0| dH/ds |1>|, dH/ds = tA - mu P.
//
// "First excited" always means first excited within the sector dynamically
// connected to the marked site (the cyclic subspace of A generated by |i*>).
// Periodic lattices reach every level, so this is the plain second
// eigenvalue. On open grids, eigenstates orthogonal to |i*> by symmetry never
// couple to the evolving state and are skipped.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "adia/errors.hpp"
#include "adia/krylov.hpp"
#include "adia/lattice.hpp"
#include "adia/rank_one.hpp"

namespace adia {

/// One sample of the spectral data along the interpolation.
struct SpectralPoint {
  double s = 0.0;
  double e0 = 0.0;
  double e1 = 0.0;
  double gap = 0.0;
  double v01 = 0.0;
  double integrand = 0.0;  // v01 / gap^2, NaN when degenerate
  bool degenerate = false;
};

struct EigenpairPacket {
  double s = 0.0;
  double e0 = 0.0;
  double e1 = 0.0;
  double gap = 0.0;
  // Resolvent form: coefficients on the normalised coupled-level states.
  std::vector<double> ground_levels;
  std::vector<double> excited_levels;
  // Site-basis eigenvectors (open path).
  Eigen::VectorXd ground_vector;
  Eigen::VectorXd excited_vector;
  double residual = 0.0;
  double trace_residual = 0.0;  // dense path only: |sum_i E_i + s mu|
  int iterations = 0;
  bool degenerate = false;

  bool has_levels() const { return !ground_levels.empty(); }
  bool has_vectors() const { return ground_vector.size() > 0; }
};

inline bool is_degenerate(double gap, double e0) { return gap < 1e-13 * std::max(std::abs(e0), 1.0); }

inline SpectralPoint make_point(const EigenpairPacket& pk, double v01) {
  SpectralPoint pt{pk.s, pk.e0, pk.e1, pk.gap, v01, 0.0, pk.degenerate};
  pt.integrand = pt.degenerate ? std::numeric_limits<double>::quiet_NaN() : v01 / (pk.gap * pk.gap);
  return pt;
}

namespace detail {

inline EigenpairPacket packet_from_secular(SecularSolution&& sol) {
  EigenpairPacket pk;
  pk.s = sol.s;
  pk.e0 = sol.e0;
  pk.e1 = sol.e1;
  pk.gap = sol.gap;
  pk.ground_levels = std::move(sol.ground);
  pk.excited_levels = std::move(sol.excited);
  pk.residual = sol.residual;
  pk.degenerate = is_degenerate(pk.gap, pk.e0);
  return pk;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Periodic path

inline EigenpairPacket solve_periodic(const CoupledSpectrum& spectrum, const ModelParams& params, double s) {
  return detail::packet_from_secular(solve_secular(spectrum, params, s));
}

inline EigenpairPacket solve_periodic(const DispersionTable& table, const ModelParams& params, double s) {
  return solve_periodic(coupled_spectrum(table), params, s);
}

// ---------------------------------------------------------------------------
// Open path

enum class OpenMethod {
  Auto,     // Dense up to dense_threshold sites, Lanczos above
  Dense,    // full diagonalisation of H(s)
  Lanczos,  // Krylov iteration from |i*> with full reorthogonalisation
  Sine,     // exact rank-one solve in the separable sine eigenbasis
};

struct OpenSolveOptions {
  OpenMethod method = OpenMethod::Auto;
  std::int64_t dense_threshold = 4096;
  double lanczos_tolerance = 1e-11;
  int max_krylov = 4000;
  bool vectors = true;  // Sine method: also materialise site-basis vectors
};

namespace detail {

inline Eigen::MatrixXd dense_adjacency(const SparseAdjacency& adj) {
  const auto n = static_cast<Eigen::Index>(adj.site_count());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (std::int64_t i = 0; i < adj.site_count(); ++i)
    for (auto j : adj.neighbors(i)) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += 1.0;
  return a;
}

// s = 1 limit from an eigen-decomposition of A (columns of `vectors`).
inline EigenpairPacket endpoint_from_eigensystem(const Eigen::VectorXd& evals, const std::vector<Eigen::VectorXd>& vecs,
                                                 std::int64_t marked, int dimension, const ModelParams& params) {
  std::vector<double> ev(evals.data(), evals.data() + evals.size());
  std::vector<double> ov(vecs.size());
  for (std::size_t k = 0; k < vecs.size(); ++k) ov[k] = vecs[k](static_cast<Eigen::Index>(marked));
  std::vector<std::vector<std::size_t>> members;
  const auto sp = coupled_spectrum_from_eigensystem(ev, ov, dimension, static_cast<std::int64_t>(vecs.front().size()),
                                                    &members);
  auto sol = solve_secular(sp, params, 1.0);
  EigenpairPacket pk = packet_from_secular(std::move(sol));
  const Eigen::Index n = vecs.front().size();
  auto build = [&](const std::vector<double>& c) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    for (std::size_t j = 0; j < members.size(); ++j) {
      const double norm = std::sqrt(sp.levels[j].weight);
      for (auto k : members[j]) v += (c[j] * ov[k] / norm) * vecs[k];
    }
    return v;
  };
  pk.ground_vector = build(pk.ground_levels);
  pk.excited_vector = build(pk.excited_levels);
  pk.ground_levels.clear();
  pk.excited_levels.clear();
  return pk;
}

inline EigenpairPacket solve_open_dense(const SparseAdjacency& adj, const ModelParams& params, double s,
                                        std::int64_t marked, int dimension) {
  const Eigen::MatrixXd a = dense_adjacency(adj);
  const auto im = static_cast<Eigen::Index>(marked);
  if (s == 1.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    std::vector<Eigen::VectorXd> vecs;
    for (Eigen::Index k = 0; k < a.cols(); ++k) vecs.push_back(es.eigenvectors().col(k));
    return endpoint_from_eigensystem(es.eigenvalues(), vecs, marked, dimension, params);
  }
  Eigen::MatrixXd h = -(1.0 - s) * params.t * a;
  h(im, im) -= s * params.mu;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");
  const auto& vals = es.eigenvalues();
  const auto& vecs = es.eigenvectors();

  // Walk ascending clusters; keep the first two that overlap |i*>.
  EigenpairPacket pk;
  pk.s = s;
  std::vector<Eigen::VectorXd> found;
  std::vector<double> energies;
  const Eigen::Index n = vals.size();
  Eigen::Index k = 0;
  while (k < n && found.size() < 2) {
    Eigen::Index e = k;
    Eigen::VectorXd proj = Eigen::VectorXd::Zero(n);
    double w = 0.0, esum = 0.0;
    while (e < n && vals(e) - vals(k) <= 1e-10 * std::max(1.0, std::abs(vals(k)))) {
      const double y = vecs(im, e);
      proj += y * vecs.col(e);
      w += y * y;
      esum += vals(e);
      ++e;
    }
    if (w > 1e-20) {
      found.push_back(proj / std::sqrt(w));
      energies.push_back(esum / static_cast<double>(e - k));
    }
    k = e;
  }
  if (found.size() < 2) throw NumericalError("dense solve found fewer than two coupled eigenstates");
  pk.e0 = energies[0];
  pk.e1 = energies[1];
  pk.gap = pk.e1 - pk.e0;
  pk.ground_vector = found[0];
  pk.excited_vector = found[1];
  pk.trace_residual = std::abs(vals.sum() + s * params.mu);
  pk.degenerate = is_degenerate(pk.gap, pk.e0);
  return pk;
}

inline EigenpairPacket solve_open_lanczos(const SparseAdjacency& adj, const ModelParams& params, double s,
                                          std::int64_t marked, int dimension, const OpenSolveOptions& opts) {
  const auto n = static_cast<Eigen::Index>(adj.site_count());
  const auto im = static_cast<Eigen::Index>(marked);
  Eigen::VectorXd start = Eigen::VectorXd::Zero(n);
  start(im) = 1.0;
  if (s == 1.0) {
    auto apply_a = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
      adj.apply<double>(std::span<const double>(x.data(), static_cast<std::size_t>(n)),
                        std::span<double>(y.data(), static_cast<std::size_t>(n)));
    };
    auto res = lanczos_lowest(apply_a, start, opts.max_krylov, opts.lanczos_tolerance, opts.max_krylov);
    Eigen::VectorXd evals = Eigen::Map<Eigen::VectorXd>(res.values.data(), static_cast<Eigen::Index>(res.values.size()));
    auto pk = endpoint_from_eigensystem(evals, res.vectors, marked, dimension, params);
    pk.iterations = res.iterations;
    return pk;
  }
  const double kappa = (1.0 - s) * params.t;
  auto apply_h = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
    adj.apply<double>(std::span<const double>(x.data(), static_cast<std::size_t>(n)),
                      std::span<double>(y.data(), static_cast<std::size_t>(n)));
    y *= -kappa;
    y(im) -= s * params.mu * x(im);
  };
  auto res = lanczos_lowest(apply_h, start, 2, opts.lanczos_tolerance, opts.max_krylov);
  if (res.values.size() < 2) throw NumericalError("Lanczos found fewer than two coupled eigenstates");
  const double scale = std::max({1.0, std::abs(res.values[0]), std::abs(res.values[1])});
  const double worst = std::max(res.residuals[0], res.residuals[1]);
  if (worst > opts.lanczos_tolerance * scale * 10.0)
    throw NumericalError(fmt::format("Lanczos did not converge at s = {}: residual {:.3e} after {} iterations", s,
                                     worst, res.iterations));
  EigenpairPacket pk;
  pk.s = s;
  pk.e0 = res.values[0];
  pk.e1 = res.values[1];
  pk.gap = pk.e1 - pk.e0;
  pk.ground_vector = std::move(res.vectors[0]);
  pk.excited_vector = std::move(res.vectors[1]);
  pk.residual = worst;
  pk.iterations = res.iterations;
  pk.degenerate = is_degenerate(pk.gap, pk.e0);
  return pk;
}

}  // namespace detail

/// Site-basis vector of a state given by coefficients on the coupled levels
/// of open_coupled_spectrum(spec).
inline Eigen::VectorXd materialize_open_state(const LatticeSpec& spec, const CoupledSpectrum& sp,
                                              std::span<const double> coefficients) {
  const int L = spec.linear_size;
  const int d = spec.dimension;
  const std::int64_t n = site_count(spec);
  detail::CyclotomicRing ring(2 * (L + 1));
  std::map<detail::CycloKey, std::size_t> index;
  for (std::size_t j = 0; j < sp.levels.size(); ++j) index.emplace(sp.levels[j].key, j);
  std::vector<detail::CycloKey> axis_key(static_cast<std::size_t>(L));
  for (int q = 1; q <= L; ++q) axis_key[static_cast<std::size_t>(q - 1)] = ring.two_cos(q);
  const auto marked = site_coordinates(spec, spec.marked_site);

  // Mode amplitudes a_k = u_k c_j / sqrt(W_j), row-major over (q_1..q_d).
  Eigen::VectorXd a(static_cast<Eigen::Index>(n));
  for (std::int64_t k = 0; k < n; ++k) {
    const auto q = site_coordinates(spec, k);  // zero-based mode indices
    detail::CycloKey key = ring.zero();
    double u = 1.0;
    for (int ax = 0; ax < d; ++ax) {
      const int qi = q[static_cast<std::size_t>(ax)];
      key = detail::add_keys(key, axis_key[static_cast<std::size_t>(qi)]);
      u *= detail::open_mode(L, qi + 1, marked[static_cast<std::size_t>(ax)]);
    }
    auto it = index.find(key);
    a(static_cast<Eigen::Index>(k)) =
        it == index.end() ? 0.0 : u * coefficients[it->second] / std::sqrt(sp.levels[it->second].weight);
  }
  // Separable transform to sites: apply Phi(c, q) along each axis.
  Eigen::MatrixXd phi(L, L);
  for (int c = 0; c < L; ++c)
    for (int q = 0; q < L; ++q) phi(c, q) = detail::open_mode(L, q + 1, c);
  std::int64_t stride = n;
  Eigen::VectorXd fiber(L), out(L);
  for (int ax = 0; ax < d; ++ax) {
    stride /= L;
    const std::int64_t block = stride * L;
    for (std::int64_t base = 0; base < n; base += block)
      for (std::int64_t off = 0; off < stride; ++off) {
        for (int i = 0; i < L; ++i) fiber(i) = a(static_cast<Eigen::Index>(base + off + i * stride));
        out.noalias() = phi * fiber;
        for (int i = 0; i < L; ++i) a(static_cast<Eigen::Index>(base + off + i * stride)) = out(i);
      }
  }
  return a;
}

/// Two lowest coupled eigenpairs of the open-grid Hamiltonian with full
/// site-basis vectors. Sine needs the lattice geometry; use the LatticeSpec
/// overload for it.
inline EigenpairPacket solve_open(const SparseAdjacency& adj, const ModelParams& params, double s, std::int64_t marked,
                                  const OpenSolveOptions& opts = {}, int dimension = 0) {
  validate(params);
  if (!(s >= 0.0 && s <= 1.0)) throw ValidationError(fmt::format("s = {} outside [0, 1]", s));
  if (marked < 0 || marked >= adj.site_count()) throw ValidationError("marked site outside the lattice");
  OpenMethod m = opts.method;
  if (m == OpenMethod::Auto) m = adj.site_count() <= opts.dense_threshold ? OpenMethod::Dense : OpenMethod::Lanczos;
  switch (m) {
    case OpenMethod::Dense:
      return detail::solve_open_dense(adj, params, s, marked, dimension);
    case OpenMethod::Lanczos:
      return detail::solve_open_lanczos(adj, params, s, marked, dimension, opts);
    default:
      throw ValidationError("the sine method needs the lattice geometry");
  }
}

inline EigenpairPacket solve_open(const LatticeSpec& spec, const ModelParams& params, double s,
                                  const OpenSolveOptions& opts = {}) {
  if (spec.boundary != Boundary::Open) throw ValidationError("solve_open needs an open-boundary spec");
  validate(spec);
  if (opts.method != OpenMethod::Sine)
    return solve_open(build_open_adjacency(spec), params, s, spec.marked_site, opts, spec.dimension);
  const auto sp = open_coupled_spectrum(spec);
  auto pk = detail::packet_from_secular(solve_secular(sp, params, s));
  if (opts.vectors) {
    pk.ground_vector = materialize_open_state(spec, sp, pk.ground_levels);
    pk.excited_vector = materialize_open_state(spec, sp, pk.excited_levels);
  }
  return pk;
}

// ---------------------------------------------------------------------------
// Matrix element

inline void check_same_s(const EigenpairPacket& pk, double s) {
  if (pk.s != s) throw ValidationError(fmt::format("packet was solved at s = {}, not s = {}", pk.s, s));
}

/// V01 from a resolvent-form packet.
inline double matrix_element(const EigenpairPacket& pk, const CoupledSpectrum& sp, const ModelParams& params,
                             double s) {
  check_same_s(pk, s);
  if (!pk.has_levels() || pk.ground_levels.size() != sp.levels.size())
    throw ValidationError("packet does not carry level coefficients for this spectrum");
  return coupled_matrix_element(sp, params, pk.ground_levels, pk.excited_levels);
}

/// V01 from site-basis vectors.
inline double matrix_element(const EigenpairPacket& pk, const SparseAdjacency& adj, std::int64_t marked,
                             const ModelParams& params, double s) {
  check_same_s(pk, s);
  if (!pk.has_vectors()) throw ValidationError("packet does not carry site-basis vectors");
  const auto n = static_cast<std::size_t>(adj.site_count());
  Eigen::VectorXd ax(static_cast<Eigen::Index>(n));
  adj.apply<double>(std::span<const double>(pk.excited_vector.data(), n), std::span<double>(ax.data(), n));
  const auto im = static_cast<Eigen::Index>(marked);
  return std::abs(params.t * pk.ground_vector.dot(ax) - params.mu * pk.ground_vector(im) * pk.excited_vector(im));
}

// ---------------------------------------------------------------------------
// Closed-form Grover model: H = -(1-s)|+><+| - s|i*><i*|

struct GroverPoint {
  double gap;
  double v01;
};

inline GroverPoint grover_reference(std::int64_t n, double s) {
  if (n < 2) throw ValidationError("Grover reference needs N >= 2");
  if (!(s >= 0.0 && s <= 1.0)) throw ValidationError(fmt::format("s = {} outside [0, 1]", s));
  const double nn = static_cast<double>(n);
  const double g = std::sqrt(1.0 - 4.0 * (1.0 - 1.0 / nn) * s * (1.0 - s));
  return {g, std::sqrt(nn - 1.0) / (nn * g)};
}

// ---------------------------------------------------------------------------
// Integrand sources: s -> SpectralPoint. All are pure and thread-safe.

using SpectralFunction = std::function<SpectralPoint(double)>;

inline SpectralFunction coupled_source(std::shared_ptr<const CoupledSpectrum> sp, const ModelParams& params) {
  validate(params);
  return [sp = std::move(sp), params](double s) {
    const auto pk = detail::packet_from_secular(solve_secular(*sp, params, s));
    return make_point(pk, coupled_matrix_element(*sp, params, pk.ground_levels, pk.excited_levels));
  };
}

inline SpectralFunction periodic_source(const LatticeSpec& spec, const ModelParams& params) {
  validate(spec);
  return coupled_source(std::make_shared<const CoupledSpectrum>(coupled_spectrum(build_dispersion(spec))), params);
}

inline OpenSolveOptions sine_options() {
  OpenSolveOptions o;
  o.method = OpenMethod::Sine;
  o.vectors = false;
  return o;
}

/// Open-grid source for the marked site in spec. Defaults to the exact sine
/// route; Dense/Lanczos/Auto solve H(s) per point.
inline SpectralFunction open_source(const LatticeSpec& spec, const ModelParams& params,
                                    const OpenSolveOptions& opts = sine_options()) {
  if (spec.boundary != Boundary::Open) throw ValidationError("open_source needs an open-boundary spec");
  validate(spec);
  validate(params);
  if (opts.method == OpenMethod::Sine)
    return coupled_source(std::make_shared<const CoupledSpectrum>(open_coupled_spectrum(spec)), params);
  auto adj = std::make_shared<const SparseAdjacency>(build_open_adjacency(spec));
  return [adj, params, opts, marked = spec.marked_site, d = spec.dimension](double s) {
    const auto pk = solve_open(*adj, params, s, marked, opts, d);
    return make_point(pk, matrix_element(pk, *adj, marked, params, s));
  };
}

inline SpectralFunction lattice_source(const LatticeSpec& spec, const ModelParams& params,
                                       const OpenSolveOptions& open_opts = sine_options()) {
  return spec.boundary == Boundary::Periodic ? periodic_source(spec, params) : open_source(spec, params, open_opts);
}

inline SpectralFunction grover_source(std::int64_t n) {
  if (n < 2) throw ValidationError("Grover reference needs N >= 2");
  return [n](double s) {
    const auto g = grover_reference(n, s);
    SpectralPoint pt;
    pt.s = s;
    pt.gap = g.gap;
    pt.e0 = -0.5 * (1.0 + g.gap);
    pt.e1 = -0.5 * (1.0 - g.gap);
    pt.v01 = g.v01;
    pt.integrand = g.v01 / (g.gap * g.gap);
    return pt;
  };
}

}  // namespace adia
