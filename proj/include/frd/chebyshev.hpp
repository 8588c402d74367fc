#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <type_traits>
#include <vector>

#include "frd/error.hpp"
#include "frd/mollifier.hpp"

namespace frd {

/// Evaluates c_0 + 2 sum_{k>=1} c_k T_k(theta) by Clenshaw's backward
/// recurrence. Trailing zero coefficients leave the result bit-identical.
inline double clenshaw_folded(std::span<const double> coeffs, double theta) {
  if (coeffs.empty()) return 0.0;
  double b1 = 0.0, b2 = 0.0;
  const double two_theta = 2.0 * theta;
  for (std::size_t k = coeffs.size() - 1; k >= 1; --k) {
    const double b0 = 2.0 * coeffs[k] + two_theta * b1 - b2;
    b2 = b1;
    b1 = b0;
  }
  return coeffs[0] + theta * b1 - b2;
}

/// Unevaluated sum hi + lo carrying about 106 bits.
struct DoubleDouble {
  double hi = 0.0, lo = 0.0;
  double value() const noexcept { return hi + lo; }
};

namespace detail {
inline DoubleDouble two_sum(double a, double b) {
  const double s = a + b;
  const double v = s - a;
  return {s, (a - (s - v)) + (b - v)};
}

inline DoubleDouble dd_add(DoubleDouble a, DoubleDouble b) {
  DoubleDouble s = two_sum(a.hi, b.hi);
  s.lo += a.lo + b.lo;
  return two_sum(s.hi, s.lo);
}

inline DoubleDouble dd_mul(DoubleDouble a, double b) {
  const double p = a.hi * b;
  const double e = std::fma(a.hi, b, -p) + a.lo * b;
  return two_sum(p, e);
}

template <typename Coeff>
DoubleDouble clenshaw_dd(std::span<const Coeff> coeffs, double theta) {
  auto as_dd = [](const Coeff& c) {
    if constexpr (std::is_same_v<Coeff, DoubleDouble>)
      return c;
    else
      return DoubleDouble{c, 0.0};
  };
  if (coeffs.empty()) return {};
  DoubleDouble b1, b2;
  for (std::size_t k = coeffs.size() - 1; k >= 1; --k) {
    DoubleDouble b0 = dd_add(dd_mul(b1, 2.0 * theta), {-b2.hi, -b2.lo});
    b0 = dd_add(b0, dd_mul(as_dd(coeffs[k]), 2.0));
    b2 = b1;
    b1 = b0;
  }
  return dd_add(dd_add(dd_mul(b1, theta), {-b2.hi, -b2.lo}), as_dd(coeffs[0]));
}
}  // namespace detail

/// clenshaw_folded carried out in double-double arithmetic.
inline double clenshaw_folded_compensated(std::span<const double> coeffs, double theta) {
  return detail::clenshaw_dd(coeffs, theta).value();
}

inline double clenshaw_folded_compensated(std::span<const DoubleDouble> coeffs, double theta) {
  return detail::clenshaw_dd(coeffs, theta).value();
}

namespace detail {
template <typename Coeff>
std::vector<double> reexpand(std::span<const Coeff> coeffs, double p, double h, double a,
                             double b) {
  detail::require(b > a, "chebyshev", "reexpand_folded", "need a < b");
  const std::size_t n = coeffs.size();
  if (n == 0) return {};
  if (n == 1) return {clenshaw_dd(coeffs, 0.0).value()};
  // Values at the Chebyshev-Gauss points of [a, b].
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.5) / static_cast<double>(n));
    const double lambda = 0.5 * (a + b) - 0.5 * (b - a) * x;
    f[i] = clenshaw_dd(coeffs, p - h * lambda).value();
  }
  // Discrete cosine transform; cos(pi m / 2n) is tabulated over m mod 4n.
  std::vector<double> table(4 * n);
  for (std::size_t m = 0; m < table.size(); ++m)
    table[m] = std::cos(std::numbers::pi * static_cast<double>(m) / (2.0 * static_cast<double>(n)));
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += f[i] * table[(k * (2 * i + 1)) % (4 * n)];
    out[k] = s / static_cast<double>(n);
  }
  return out;
}
}  // namespace detail

/// A folded series in theta = p - h * lambda, rewritten as a folded series
/// of the same degree in theta' = (a + b - 2 lambda) / (b - a). The new
/// coefficients are bounded by the size of the polynomial on [a, b] rather
/// than on the whole source interval, which matters when it is tiny there.
inline std::vector<double> reexpand_folded(std::span<const double> coeffs, double p, double h,
                                           double a, double b) {
  return detail::reexpand(coeffs, p, h, a, b);
}

/// Same, from coefficients held to double-double precision.
inline std::vector<double> reexpand_folded(std::span<const DoubleDouble> coeffs, double p,
                                           double h, double a, double b) {
  return detail::reexpand(coeffs, p, h, a, b);
}

/// Chebyshev polynomial filter W_t^*(lambda) = sum_{|k| <= t} c_k T_k(1 - lambda/2)
/// with c_k = t^-1 phi_hat(k/t); only c_0..c_K, K = floor(t), are stored.
struct ChebyshevWeight {
  double t = 0.0;
  std::vector<double> coeffs;

  std::size_t degree() const noexcept { return coeffs.empty() ? 0 : coeffs.size() - 1; }

  double abs_sum() const noexcept {
    double s = std::abs(coeffs.empty() ? 0.0 : coeffs[0]);
    for (std::size_t k = 1; k < coeffs.size(); ++k) s += 2.0 * std::abs(coeffs[k]);
    return s;
  }
};

inline ChebyshevWeight chebyshev_coefficients(const Mollifier& m, double t) {
  detail::require(t > 0, "spectral_weights", "chebyshev_coefficients", "t must be positive");
  ChebyshevWeight w;
  w.t = t;
  const auto degree = static_cast<std::size_t>(std::floor(t));
  w.coeffs.resize(degree + 1);
  for (std::size_t k = 0; k <= degree; ++k)
    w.coeffs[k] = m.phi_hat(static_cast<double>(k) / t) / t;
  return w;
}

/// W_t^*(lambda) for lambda in [0, 4] via Clenshaw at theta = 1 - lambda/2.
inline double eval_discrete_weight(const ChebyshevWeight& w, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 4.0))
    throw InvalidArgument("spectral_weights", "eval_discrete_weight",
                          "lambda outside [0, 4]");
  return clenshaw_folded(w.coeffs, 1.0 - 0.5 * lambda);
}

/// Periodized form sum_n phi(arccos(1 - lambda/2) t - 2 pi n t), truncated
/// where the argument leaves the tabulated range. Independent of the
/// Chebyshev coefficients.
inline double eval_discrete_weight_direct(const Mollifier& m, double lambda, double t) {
  if (!(lambda >= 0.0 && lambda <= 4.0))
    throw InvalidArgument("spectral_weights", "eval_discrete_weight_direct",
                          "lambda outside [0, 4]");
  detail::require(t > 0, "spectral_weights", "eval_discrete_weight_direct",
                  "t must be positive");
  const double x = std::acos(1.0 - 0.5 * lambda);
  const double period = 2.0 * std::numbers::pi * t;
  const double centre = x * t;
  double sum = m.phi(centre);
  for (int n = 1;; ++n) {
    const double lo = centre - n * period, hi = centre + n * period;
    if (std::abs(lo) >= m.x_max() && std::abs(hi) >= m.x_max()) break;
    sum += m.phi(lo) + m.phi(hi);
  }
  return sum;
}

/// Dense polynomial in monomial coefficients (index = power).
using Polynomial = std::vector<double>;

namespace poly {
inline Polynomial add(const Polynomial& a, const Polynomial& b, double sb = 1.0) {
  Polynomial r(std::max(a.size(), b.size()), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) r[i] += a[i];
  for (std::size_t i = 0; i < b.size(); ++i) r[i] += sb * b[i];
  return r;
}

inline Polynomial mul(const Polynomial& a, const Polynomial& b) {
  if (a.empty() || b.empty()) return {};
  Polynomial r(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  return r;
}

inline Polynomial scale(Polynomial a, double s) {
  for (double& c : a) c *= s;
  return a;
}

inline double eval(const Polynomial& p, double x) {
  double r = 0.0;
  for (std::size_t i = p.size(); i-- > 0;) r = r * x + p[i];
  return r;
}
}  // namespace poly

/// Monomial coefficients of T_0..T_n in the variable X.
inline std::vector<Polynomial> chebyshev_monomials(int n) {
  std::vector<Polynomial> t;
  t.push_back({1.0});
  if (n >= 1) t.push_back({0.0, 1.0});
  for (int k = 1; k < n; ++k)
    t.push_back(poly::add(poly::mul({0.0, 2.0}, t[k]), t[k - 1], -1.0));
  return t;
}

/// max over n in [1, n_max] and over monomial coefficients of
/// |(T_{n+1} - 2 T_n + T_{n-1}) - 2 (X - 1) T_n|.
inline double wave_identity_residual(int n_max) {
  const auto T = chebyshev_monomials(n_max + 1);
  double worst = 0.0;
  for (int n = 1; n <= n_max; ++n) {
    const Polynomial lhs = poly::add(poly::add(T[n + 1], T[n - 1]), T[n], -2.0);
    const Polynomial rhs = poly::mul({-2.0, 2.0}, T[n]);
    const Polynomial diff = poly::add(lhs, rhs, -1.0);
    for (double c : diff) worst = std::max(worst, std::abs(c));
  }
  return worst;
}

}  // namespace frd
