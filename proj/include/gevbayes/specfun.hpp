#pragma once

#include "numerics.hpp"

#include <cmath>
#include <cstdint>

namespace gevbayes {

/// log Gamma(x) for x > 0.
template <class T = double>
T log_gamma(T x) {
  require(x > T(0), "log_gamma: x must be positive");
  return std::lgamma(x);
}

/// Digamma psi(x) for x > 0: upward recurrence, then the asymptotic series.
template <class T>
T digamma(T x) {
  require(x > T(0), "digamma: x must be positive");
  T acc = 0;
  while (x < T(10)) {
    acc -= T(1) / x;
    x += T(1);
  }
  const T r = T(1) / (x * x);
  // Bernoulli tail: -sum B_2k / (2k x^2k)
  const T tail =
      r * (T(1) / 12 -
           r * (T(1) / 120 -
                r * (T(1) / 252 -
                     r * (T(1) / 240 - r * (T(1) / 132 - r * (T(691) / 32760 - r * (T(1) / 12)))))));
  return acc + std::log(x) - T(0.5) / x - tail;
}

/// Trigamma psi'(x) for x > 0.
template <class T>
T trigamma(T x) {
  require(x > T(0), "trigamma: x must be positive");
  T acc = 0;
  while (x < T(10)) {
    acc += T(1) / (x * x);
    x += T(1);
  }
  const T r = T(1) / (x * x);
  const T tail =
      r * (T(1) / 6 -
           r * (T(1) / 30 -
                r * (T(1) / 42 - r * (T(1) / 30 - r * (T(5) / 66 - r * (T(691) / 2730 - r * (T(7) / 6)))))));
  return acc + T(1) / x + r / 2 + tail / x;
}

struct GammaDerivs {
  double psi;
  double psi1;
};

inline GammaDerivs gamma_derivatives(double x) { return {digamma(x), trigamma(x)}; }

/// b-th derivative of Gamma at x, b in {0,1,2}.
template <class T>
T gamma_deriv(T x, int b) {
  const T g = std::exp(std::lgamma(x));
  switch (b) {
    case 0:
      return g;
    case 1:
      return g * digamma(x);
    case 2: {
      const T p = digamma(x);
      return g * (p * p + trigamma(x));
    }
    default:
      throw std::invalid_argument("gamma_deriv: b must be 0, 1 or 2");
  }
}

inline double log_beta(double a, double b) {
  require(a > 0.0 && b > 0.0, "log_beta: arguments must be positive");
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

namespace detail {

inline int inc_gamma_max_iter(double a) { return 100 + static_cast<int>(20.0 * std::sqrt(a)) + 50; }

// log of the series sum_{k>=0} z^k / ((a+1)...(a+k))
inline double log_lower_series(double a, double z) {
  double term = 1.0, sum = 1.0;
  const int itmax = inc_gamma_max_iter(a) + static_cast<int>(4.0 * z);
  for (int k = 1; k < itmax; ++k) {
    term *= z / (a + k);
    sum += term;
    if (term < sum * 1e-16) return std::log(sum);
  }
  throw NumericalError("incomplete gamma series failed to converge");
}

// log of the Lentz continued fraction for Gamma(a,z) e^z z^{-a}
inline double log_upper_cf(double a, double z) {
  constexpr double tiny = 1e-300;
  double b = z + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  const int itmax = inc_gamma_max_iter(a) + 1000;
  for (int i = 1; i < itmax; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 4e-16) return std::log(h);
  }
  throw NumericalError("incomplete gamma continued fraction failed to converge");
}

}  // namespace detail

/// log P(a, z) and log Q(a, z) for the regularized incomplete gamma functions.
struct LogIncGamma {
  double log_p;
  double log_q;
};

inline LogIncGamma log_inc_gamma(double a, double z) {
  require(a > 0.0, "incomplete gamma: a must be positive");
  require(z >= 0.0 || std::isnan(z), "incomplete gamma: z must be nonnegative");
  if (std::isnan(z)) return {kNaN, kNaN};
  if (z == 0.0) return {-kInf, 0.0};
  if (z == kInf) return {0.0, -kInf};
  const double lz = std::log(z);
  if (z < a + 1.0) {
    const double lp = -z + a * lz - std::lgamma(a + 1.0) + detail::log_lower_series(a, z);
    const double lp_c = std::min(lp, 0.0);
    return {lp_c, log1mexp(-lp_c)};
  }
  const double lq = -z + a * lz - std::lgamma(a) + detail::log_upper_cf(a, z);
  const double lq_c = std::min(lq, 0.0);
  return {log1mexp(-lq_c), lq_c};
}

/// Same as log_inc_gamma but takes log z, so that z may be outside double range.
inline LogIncGamma log_inc_gamma_logz(double a, double log_z) {
  if (log_z == -kInf) return {-kInf, 0.0};
  if (log_z == kInf) return {0.0, -kInf};
  if (log_z > 709.0) return {0.0, -kInf};  // e^{-z} is below every representable log
  if (log_z < -700.0) {
    // P ~ z^a / Gamma(a+1)
    const double lp = a * log_z - std::lgamma(a + 1.0);
    return {lp, log1mexp(-lp)};
  }
  return log_inc_gamma(a, std::exp(log_z));
}

inline double reg_inc_gamma_lower(double a, double z) { return std::exp(log_inc_gamma(a, z).log_p); }
inline double reg_inc_gamma_upper(double a, double z) { return std::exp(log_inc_gamma(a, z).log_q); }

/// k-th raw moment of the generalized Pareto law with shape kappa and scale tau.
inline double gp_moment(double kappa, double tau, int k) {
  require(k >= 1, "gp_moment: k must be positive");
  require(tau > 0.0, "gp_moment: tau must be positive");
  require(k * kappa < 1.0, "gp_moment: requires k*kappa < 1");
  double log_m = std::lgamma(k + 1.0) + k * std::log(tau);
  for (int i = 0; i <= k; ++i) log_m -= std::log1p(-i * kappa);
  return std::exp(log_m);
}

}  // namespace gevbayes
