#pragma once

// One-dimensional numerics used by the schedule pipeline.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "adia/errors.hpp"

namespace adia {

struct Extremum {
  double x;
  double value;
};

/// Maximum of a unimodal f on [a, b] by golden-section search. The bracket
/// shrinks until it is below xtol (absolute) or stops shrinking.
template <class F>
Extremum golden_section_max(F&& f, double a, double b, double xtol = 1e-13) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 400 && b - a > xtol; ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      if (!(c > a && c < d)) break;
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      if (!(d > c && d < b)) break;
      fd = f(d);
    }
  }
  return fc >= fd ? Extremum{c, fc} : Extremum{d, fd};
}

template <class F>
Extremum golden_section_min(F&& f, double a, double b, double xtol = 1e-13) {
  auto r = golden_section_max([&](double x) { return -f(x); }, a, b, xtol);
  return {r.x, -r.value};
}

/// Root of f on [a, b] given f(a) and f(b) of opposite sign (or zero).
template <class F>
double bisect(F&& f, double a, double b, double fa, double xtol = 1e-15) {
  if (fa == 0.0) return a;
  for (int it = 0; it < 200; ++it) {
    const double m = a + 0.5 * (b - a);
    if (!(m > a && m < b) || b - a <= xtol) break;
    const double fm = f(m);
    if (fm == 0.0) return m;
    if ((fm < 0.0) == (fa < 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return a + 0.5 * (b - a);
}

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;  // sum of local |S2 - S1| / 15 estimates
  std::size_t evaluations = 0;
};

namespace detail {

template <class F>
void simpson_step(F& f, double a, double b, double fa, double fm, double fb, double whole, double tol, int depth,
                  QuadratureResult& acc) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  acc.evaluations += 2;
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15.0 * tol || !(m > a && m < b)) {
    acc.value += left + right + diff / 15.0;
    acc.error += std::abs(diff) / 15.0;
    return;
  }
  simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, acc);
  simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, acc);
}

}  // namespace detail

/// Adaptive Simpson on [a, b] to absolute tolerance tol, given the endpoint
/// values. Each subdivision halves the local tolerance.
template <class F>
QuadratureResult adaptive_simpson(F&& f, double a, double b, double fa, double fb, double tol, int max_depth = 40) {
  QuadratureResult acc;
  if (b == a) return acc;
  const double fm = f(0.5 * (a + b));
  acc.evaluations = 1;
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  detail::simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth, acc);
  return acc;
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
/// Preserves monotonicity of the data; x must be strictly increasing.
class MonotoneCubic {
 public:
  MonotoneCubic() = default;
  MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n) throw ValidationError("monotone cubic needs at least two matching samples");
    for (std::size_t i = 1; i < n; ++i)
      if (!(x_[i] > x_[i - 1])) throw ValidationError("monotone cubic abscissae must increase strictly");
    std::vector<double> h(n - 1), delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      h[i] = x_[i + 1] - x_[i];
      delta[i] = (y_[i + 1] - y_[i]) / h[i];
    }
    m_.assign(n, 0.0);
    if (n == 2) {
      m_[0] = m_[1] = delta[0];
      return;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (delta[i - 1] * delta[i] <= 0.0) continue;
      const double w1 = 2.0 * h[i] + h[i - 1], w2 = h[i] + 2.0 * h[i - 1];
      m_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
    m_[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    m_[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  }

  double operator()(double x) const {
    const std::size_t i = segment(x);
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y_[i] + (t3 - 2 * t2 + t) * h * m_[i] + (-2 * t3 + 3 * t2) * y_[i + 1] +
           (t3 - t2) * h * m_[i + 1];
  }

  double front() const { return x_.front(); }
  double back() const { return x_.back(); }

 private:
  static double end_slope(double h0, double h1, double d0, double d1) {
    double m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (m * d0 <= 0.0) m = 0.0;
    else if (d0 * d1 <= 0.0 && std::abs(m) > 3.0 * std::abs(d0)) m = 3.0 * d0;
    return m;
  }

  std::size_t segment(double x) const {
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    return std::min(i, x_.size() - 2);
  }

  std::vector<double> x_, y_, m_;
};

}  // namespace adia
