#pragma once

// Exact arithmetic in Z[zeta_M] for sums of 2cos(2*pi*q/M).
//
// Lattice dispersions are sums of cosines at rational multiples of pi. Two
// such sums are equal iff their integer coefficient vectors over powers of a
// primitive M-th root of unity agree after reduction modulo the cyclotomic
// polynomial Phi_M. The reduced vector is used as an exact grouping key, so
// degenerate levels are merged without any floating-point tolerance.

#include <cstdint>
#include <map>
#include <mutex>
#include <vector>

#include "adia/errors.hpp"

namespace adia::detail {

using CycloKey = std::vector<std::int64_t>;
using Poly = std::vector<std::int64_t>;

// Quotient of num by a monic den; the division must be exact.
inline Poly divide_exact(const Poly& num, const Poly& den) {
  const int dn = static_cast<int>(den.size()) - 1;
  const int nn = static_cast<int>(num.size()) - 1;
  if (dn > nn) throw NumericalError("cyclotomic: degree mismatch in exact division");
  Poly rem = num;
  Poly quot(static_cast<std::size_t>(nn - dn + 1), 0);
  for (int i = nn; i >= dn; --i) {
    const std::int64_t c = rem[static_cast<std::size_t>(i)];
    if (c == 0) continue;
    quot[static_cast<std::size_t>(i - dn)] = c;
    for (int j = 0; j <= dn; ++j) rem[static_cast<std::size_t>(i - dn + j)] -= c * den[static_cast<std::size_t>(j)];
  }
  for (int i = 0; i < dn; ++i)
    if (rem[static_cast<std::size_t>(i)] != 0) throw NumericalError("cyclotomic: inexact division");
  return quot;
}

/// Coefficients of Phi_n, lowest degree first.
inline Poly cyclotomic_polynomial(int n) {
  static std::map<int, Poly> cache;
  static std::mutex guard;
  {
    std::lock_guard<std::mutex> lock(guard);
    if (auto it = cache.find(n); it != cache.end()) return it->second;
  }
  if (n < 1) throw ValidationError("cyclotomic polynomial index must be positive");
  Poly p(static_cast<std::size_t>(n) + 1, 0);
  p.front() = -1;
  p.back() = 1;
  if (n > 1) {
    for (int d = 1; d < n; ++d)
      if (n % d == 0) p = divide_exact(p, cyclotomic_polynomial(d));
  }
  std::lock_guard<std::mutex> lock(guard);
  cache.emplace(n, p);
  return p;
}

/// Z[zeta_M] modulo Phi_M; elements are coefficient vectors of length phi(M).
class CyclotomicRing {
 public:
  explicit CyclotomicRing(int modulus) : modulus_(modulus), phi_(cyclotomic_polynomial(modulus)) {}

  int modulus() const noexcept { return modulus_; }
  std::size_t degree() const noexcept { return phi_.size() - 1; }

  CycloKey zero() const { return CycloKey(degree(), 0); }

  /// Key of zeta^q + zeta^-q = 2cos(2*pi*q/M).
  CycloKey two_cos(int q) const {
    Poly p(static_cast<std::size_t>(modulus_), 0);
    const int a = ((q % modulus_) + modulus_) % modulus_;
    p[static_cast<std::size_t>(a)] += 1;
    p[static_cast<std::size_t>((modulus_ - a) % modulus_)] += 1;
    return reduce(std::move(p));
  }

  CycloKey reduce(Poly p) const {
    const int d = static_cast<int>(degree());
    for (int i = static_cast<int>(p.size()) - 1; i >= d; --i) {
      const std::int64_t c = p[static_cast<std::size_t>(i)];
      if (c == 0) continue;
      for (int j = 0; j <= d; ++j) p[static_cast<std::size_t>(i - d + j)] -= c * phi_[static_cast<std::size_t>(j)];
    }
    p.resize(static_cast<std::size_t>(d), 0);
    return p;
  }

 private:
  int modulus_;
  Poly phi_;
};

inline CycloKey add_keys(const CycloKey& a, const CycloKey& b) {
  CycloKey r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

}  // namespace adia::detail
