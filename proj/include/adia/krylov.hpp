#pragma once

// Lanczos with full reorthogonalisation: extremal eigenpairs of a real
// symmetric operator, and the Krylov propagator exp(-i tau H) psi.

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "adia/errors.hpp"

namespace adia {

struct LanczosResult {
  std::vector<double> values;           // lowest Ritz values, ascending
  std::vector<Eigen::VectorXd> vectors; // matching Ritz vectors (unit norm)
  std::vector<double> residuals;        // ||H y - theta y||
  int iterations = 0;
  bool exhausted = false;               // Krylov space became invariant
};

namespace detail {

template <class Vec>
void orthogonalise(Vec& w, const std::vector<Vec>& basis) {
  // Classical Gram-Schmidt, applied twice.
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& q : basis) w -= q * q.dot(w);
}

inline Eigen::MatrixXd tridiagonal(const std::vector<double>& alpha, const std::vector<double>& beta, std::size_t m) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = alpha[i];
    if (i + 1 < m) {
      t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i + 1)) = beta[i];
      t(static_cast<Eigen::Index>(i + 1), static_cast<Eigen::Index>(i)) = beta[i];
    }
  }
  return t;
}

}  // namespace detail

/// Lowest `wanted` eigenpairs of the operator reachable from `start`.
/// apply(x, y) must compute y = H x.
template <class Apply>
LanczosResult lanczos_lowest(Apply&& apply, const Eigen::VectorXd& start, int wanted, double tol, int max_iter) {
  const Eigen::Index n = start.size();
  max_iter = static_cast<int>(std::min<Eigen::Index>(max_iter, n));
  std::vector<Eigen::VectorXd> q;
  std::vector<double> alpha, beta;
  q.push_back(start / start.norm());
  Eigen::VectorXd w(n);

  LanczosResult res;
  for (int j = 0; j < max_iter; ++j) {
    apply(q[static_cast<std::size_t>(j)], w);
    const double a = q[static_cast<std::size_t>(j)].dot(w);
    alpha.push_back(a);
    w -= a * q[static_cast<std::size_t>(j)];
    if (j > 0) w -= beta[static_cast<std::size_t>(j - 1)] * q[static_cast<std::size_t>(j - 1)];
    detail::orthogonalise(w, q);
    const double b = w.norm();
    beta.push_back(b);

    const std::size_t m = alpha.size();
    double scale = 1.0;
    for (double x : alpha) scale = std::max(scale, std::abs(x));
    for (double x : beta) scale = std::max(scale, std::abs(x));
    const bool invariant = b <= 1e-12 * scale;
    const bool last = j + 1 == max_iter;
    if (invariant || last || (m >= static_cast<std::size_t>(wanted) && (m % 4 == 0))) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(detail::tridiagonal(alpha, beta, m));
      const int k = std::min<int>(wanted, static_cast<int>(m));
      bool converged = static_cast<int>(m) >= wanted;
      std::vector<double> resid(static_cast<std::size_t>(k));
      for (int i = 0; i < k; ++i) {
        resid[static_cast<std::size_t>(i)] = invariant ? 0.0 : std::abs(b * es.eigenvectors()(static_cast<Eigen::Index>(m) - 1, i));
        if (resid[static_cast<std::size_t>(i)] > tol * scale) converged = false;
      }
      if (converged || invariant || last) {
        res.iterations = static_cast<int>(m);
        res.exhausted = invariant;
        for (int i = 0; i < k; ++i) {
          Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
          for (std::size_t r = 0; r < m; ++r) y += es.eigenvectors()(static_cast<Eigen::Index>(r), i) * q[r];
          res.values.push_back(es.eigenvalues()(i));
          res.vectors.push_back(y / y.norm());
          res.residuals.push_back(resid[static_cast<std::size_t>(i)]);
        }
        return res;
      }
    }
    if (invariant) break;
    q.push_back(w / b);
  }
  throw NumericalError("Lanczos terminated without a result");
}

/// psi <- exp(-i tau H) psi for real symmetric H. apply(x, y) computes y = H x
/// on complex vectors. Steps too long for max_dim Krylov vectors are split.
template <class Apply>
void krylov_propagate(Apply&& apply, Eigen::VectorXcd& psi, double tau, double tol = 1e-13, int max_dim = 40) {
  using cd = std::complex<double>;
  const double beta0 = psi.norm();
  if (beta0 == 0.0 || tau == 0.0) return;
  const Eigen::Index n = psi.size();
  max_dim = static_cast<int>(std::min<Eigen::Index>(max_dim, n));

  std::vector<Eigen::VectorXcd> q;
  std::vector<double> alpha, beta;
  q.push_back(psi / beta0);
  Eigen::VectorXcd w(n);

  for (int j = 0; j < max_dim; ++j) {
    apply(q[static_cast<std::size_t>(j)], w);
    const double a = q[static_cast<std::size_t>(j)].dot(w).real();
    alpha.push_back(a);
    w -= a * q[static_cast<std::size_t>(j)];
    if (j > 0) w -= beta[static_cast<std::size_t>(j - 1)] * q[static_cast<std::size_t>(j - 1)];
    detail::orthogonalise(w, q);
    const double b = w.norm();
    beta.push_back(b);
    const std::size_t m = alpha.size();

    double scale = 1.0;
    for (double x : alpha) scale = std::max(scale, std::abs(x));
    const bool invariant = b <= 1e-14 * scale;
    if (invariant || m % 2 == 0 || j + 1 == max_dim) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(detail::tridiagonal(alpha, beta, m));
      const auto& v = es.eigenvectors();
      Eigen::VectorXcd y = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(m));
      for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(m); ++k) {
        const cd phase = std::exp(cd(0.0, -tau * es.eigenvalues()(k))) * v(0, k);
        y += phase * v.col(k).cast<cd>();
      }
      const double err = invariant ? 0.0 : b * std::abs(y(static_cast<Eigen::Index>(m) - 1));
      if (err <= tol) {
        Eigen::VectorXcd out = Eigen::VectorXcd::Zero(n);
        for (std::size_t r = 0; r < m; ++r) out += y(static_cast<Eigen::Index>(r)) * q[r];
        psi = beta0 * out;
        return;
      }
    }
    if (invariant) break;
    q.push_back(w / b);
  }
  // Not converged within max_dim vectors: take two half steps.
  if (std::abs(tau) < 1e-300) throw NumericalError("Krylov propagator failed to converge");
  krylov_propagate(apply, psi, 0.5 * tau, tol, max_dim);
  krylov_propagate(apply, psi, 0.5 * tau, tol, max_dim);
}

}  // namespace adia
