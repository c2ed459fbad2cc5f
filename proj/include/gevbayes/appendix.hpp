#pragma once

// Numeric checks of the auxiliary inequalities behind the region bounds.

#include "estimation.hpp"
#include "gev.hpp"
#include "numerics.hpp"
#include "quadrature.hpp"
#include "rng.hpp"
#include "specfun.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gevbayes {

/// Both sides of an inequality lhs < rhs, kept in log space.
struct BoundCheck {
  double lhs_log = kNaN;
  double rhs_log = kNaN;
  bool holds = false;
  bool converged = true;

  double lhs() const { return std::exp(lhs_log); }
  double rhs() const { return std::exp(rhs_log); }
};

/// int_0^inf s^{n-1} prod (1 + delta_j s)^{-1-xi} ds  <  B(n, n xi) / prod delta_j.
///
/// The left side is integrated in u = s/(1+s) over (0, 1), scaled by its
/// largest value on a grid so the integrand stays in range.
inline BoundCheck carlson_bound_check(std::span<const double> deltas, double xi, double quad_tol = 1e-10) {
  require(!deltas.empty(), "carlson_bound_check: deltas must be non-empty");
  require(xi > 0.0, "carlson_bound_check: xi must be positive");
  double lo = kInf, hi = -kInf, sum_log_d = 0.0;
  for (double d : deltas) {
    require(d > 0.0 && std::isfinite(d), "carlson_bound_check: deltas must be positive");
    lo = std::min(lo, d);
    hi = std::max(hi, d);
    sum_log_d += std::log(d);
  }
  require(lo < hi, "carlson_bound_check: deltas must not all be equal");
  const double n = static_cast<double>(deltas.size());

  auto log_f = [&](double u) {
    if (!(u > 0.0) || !(u < 1.0)) return -kInf;
    const double ls = std::log(u) - std::log1p(-u);
    double acc = (n - 1.0) * ls - 2.0 * std::log1p(-u);
    const double sv = std::exp(ls);
    for (double d : deltas) acc -= (1.0 + xi) * std::log1p(d * sv);
    return acc;
  };
  double peak = -kInf;
  constexpr int grid = 4000;
  for (int i = 1; i < grid; ++i) peak = std::max(peak, log_f(static_cast<double>(i) / grid));
  const QuadResult q =
      gauss_kronrod([&](double u) { return std::exp(log_f(u) - peak); }, 0.0, 1.0, 0.0, quad_tol, 20000);

  BoundCheck r;
  r.lhs_log = peak + std::log(q.value);
  r.rhs_log = log_beta(n, n * xi) - sum_log_d;
  r.converged = q.converged;
  r.holds = r.lhs_log < r.rhs_log;
  return r;
}

/// gamma(a, z) < 7/sqrt(a) exp(-z + a log z), with gamma the unregularized
/// lower incomplete gamma function.
inline BoundCheck incgamma_bound_check(double a, double z) {
  require(a > 0.0 && z > 0.0, "incgamma_bound_check: a and z must be positive");
  BoundCheck r;
  r.lhs_log = log_inc_gamma(a, z).log_p + std::lgamma(a);
  r.rhs_log = std::log(7.0) - 0.5 * std::log(a) - z + a * std::log(z);
  r.holds = r.lhs_log < r.rhs_log;
  return r;
}

/// The sequence used with the incomplete-gamma bound: a = n, z = (n-1) log(n xi)/(n xi).
inline BoundCheck incgamma_bound_check_seq(double n, double xi) {
  require(n >= 2.0 && xi > 0.0, "incgamma_bound_check_seq: need n >= 2 and xi > 0");
  const double nx = n * xi;
  const double z = (n - 1.0) * std::log(nx) / nx;
  require(z > 0.0, "incgamma_bound_check_seq: need n xi > 1");
  return incgamma_bound_check(n, z);
}

/// B(n-1, (n-1)/(xi log(n-1)))  <  30 sqrt(b) exp((n-1)/b - (n-1)/xi),
/// for xi in (b, 2b) and (n-1)/(2 b log(n-1)) > 1.47.
inline BoundCheck beta_bound_check(double n, double b, double xi) {
  require(n > 2.0 && b > 0.0, "beta_bound_check: need n > 2 and b > 0");
  const double m = n - 1.0, lm = std::log(m);
  require(m / (2.0 * b * lm) > 1.47, "beta_bound_check: n too small for this b");
  require(xi > b && xi < 2.0 * b, "beta_bound_check: xi must lie in (b, 2b)");
  BoundCheck r;
  r.lhs_log = log_beta(m, m / (xi * lm));
  r.rhs_log = std::log(30.0) + 0.5 * std::log(b) + m / b - m / xi;
  r.holds = r.lhs_log < r.rhs_log;
  return r;
}

/// The two spacing inequalities for a sample drawn with xi0 > 0.
struct SpacingCheck {
  BoundCheck product;  // prod_{j>=2} (Y_(j) - beta_hat)/(Y_(j) - Y_(1)) vs its bound
  BoundCheck part1;    // lower bound on sum_{j>=2} log(xi0 (Y_(j) - Y_(1)) / tau0); holds when lhs >= rhs
  bool holds = false;
};

inline SpacingCheck spacing_bound_check(const Sample& s, const MleFit& fit, const GevParams& theta0) {
  require(theta0.xi > 0.0 && theta0.tau > 0.0, "spacing_bound_check: requires xi0 > 0");
  require(fit.converged && fit.theta_hat.xi > 0.0, "spacing_bound_check: needs a converged fit with xi_hat > 0");
  const double beta_hat = fit.theta_hat.mu - fit.theta_hat.tau / fit.theta_hat.xi;
  const double y1 = s.min();
  require(y1 > beta_hat, "spacing_bound_check: fit outside the support");
  const double n = static_cast<double>(s.n());
  const double x0 = theta0.xi, t0 = theta0.tau;

  SpacingCheck c;
  CompensatedSum prod, part;
  for (std::size_t j = 1; j < s.n(); ++j) {
    const double yj = s[j];
    const double gap = yj - y1;
    prod += std::log(yj - beta_hat) - std::log(gap);
    part += std::log(x0 * gap / t0);
  }
  c.product.lhs_log = prod.value();
  c.product.rhs_log = std::log(t0) + 4.0 * n / x0 - n * std::log(2.0) - std::log(x0) - std::log(y1 - beta_hat);
  c.product.holds = c.product.lhs_log < c.product.rhs_log;
  c.part1.lhs_log = part.value();
  c.part1.rhs_log = n * x0 * kEulerGamma - 4.0 * n / x0;
  c.part1.holds = c.part1.lhs_log >= c.part1.rhs_log;
  c.holds = c.product.holds && c.part1.holds;
  return c;
}

/// Draw from the generalized Pareto law with shape kappa and scale tau.
inline double gp_draw(double kappa, double tau, Philox4x32& rng) {
  const double e = -std::log(rng.uniform());  // standard exponential
  if (std::abs(kappa) < 1e-12) return tau * e;
  return tau * std::expm1(kappa * e) / kappa;
}

struct GpMomentCheck {
  double exact = kNaN;
  double mc_mean = kNaN;
  double mc_se = kNaN;
  bool holds = false;  // |mc_mean - exact| <= z * mc_se
};

/// Monte Carlo oracle for gp_moment.
inline GpMomentCheck gp_moment_check(double kappa, double tau, int k, std::size_t draws, std::uint64_t seed,
                                     double z = 3.0) {
  GpMomentCheck c;
  c.exact = gp_moment(kappa, tau, k);
  Philox4x32 rng(seed, 0x6770);
  CompensatedSum s1, s2;
  for (std::size_t i = 0; i < draws; ++i) {
    const double x = std::pow(gp_draw(kappa, tau, rng), k);
    s1 += x;
    s2 += x * x;
  }
  const double m = static_cast<double>(draws);
  c.mc_mean = s1.value() / m;
  c.mc_se = std::sqrt(std::max(s2.value() / m - c.mc_mean * c.mc_mean, 0.0) / (m - 1.0));
  c.holds = std::abs(c.mc_mean - c.exact) <= z * c.mc_se;
  return c;
}

/// Outcome of a randomized sweep of one inequality.
struct SweepResult {
  std::string name;
  int cases = 0;
  int held = 0;
  int skipped = 0;      // draws that fell outside the preconditions
  double worst = kNaN;  // largest lhs_log - rhs_log seen (or |dev|/se for gp moments)

  bool all_hold() const { return cases > 0 && held == cases; }
};

namespace detail {
inline double uniform_in(Philox4x32& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }
inline void note(SweepResult& r, bool holds, double margin) {
  ++r.cases;
  r.held += holds ? 1 : 0;
  r.worst = std::isnan(r.worst) ? margin : std::max(r.worst, margin);
}
}  // namespace detail

inline SweepResult carlson_sweep(int cases, std::uint64_t seed) {
  SweepResult r{"carlson"};
  Philox4x32 rng(seed, 0xCA);
  while (r.cases < cases) {
    const int n = 1 + static_cast<int>(rng.uniform() * 8.0);
    std::vector<double> d;
    for (int j = 0; j < n + 1; ++j) d.push_back(std::exp(detail::uniform_in(rng, -2.0, 2.0)));
    const double xi = detail::uniform_in(rng, 0.2, 3.0);
    const BoundCheck b = carlson_bound_check(d, xi);
    if (!b.converged) {
      ++r.skipped;
      continue;
    }
    detail::note(r, b.holds, b.lhs_log - b.rhs_log);
  }
  return r;
}

inline SweepResult incgamma_sweep(int cases, std::uint64_t seed) {
  SweepResult r{"incomplete_gamma"};
  Philox4x32 rng(seed, 0x16);
  while (r.cases < cases) {
    const double n = std::round(std::exp(detail::uniform_in(rng, std::log(100.0), std::log(1e5))));
    const double xi = std::exp(detail::uniform_in(rng, std::log(0.5), std::log(5.0)));
    const BoundCheck b = incgamma_bound_check_seq(n, xi);
    detail::note(r, b.holds, b.lhs_log - b.rhs_log);
  }
  return r;
}

inline SweepResult beta_sweep(int cases, std::uint64_t seed) {
  SweepResult r{"approx_beta"};
  Philox4x32 rng(seed, 0xBE);
  while (r.cases < cases) {
    const double n = std::round(std::exp(detail::uniform_in(rng, std::log(100.0), std::log(1e5))));
    const double b = std::exp(detail::uniform_in(rng, std::log(0.2), std::log(5.0)));
    const double xi = b * detail::uniform_in(rng, 1.0 + 1e-9, 2.0 - 1e-9);
    if (!((n - 1.0) / (2.0 * b * std::log(n - 1.0)) > 1.47)) {
      ++r.skipped;
      continue;
    }
    const BoundCheck c = beta_bound_check(n, b, xi);
    detail::note(r, c.holds, c.lhs_log - c.rhs_log);
  }
  return r;
}

/// Cases keep 2 k kappa < 1 so that the Monte Carlo standard error exists.
inline SweepResult gp_moment_sweep(int cases, std::uint64_t seed, std::size_t draws = 100000, double z = 4.0) {
  SweepResult r{"gp_moments"};
  Philox4x32 rng(seed, 0x69);
  for (int i = 0; i < cases; ++i) {
    const int k = 1 + static_cast<int>(rng.uniform() * 3.0);
    const double kappa = detail::uniform_in(rng, -0.5, 0.49 / k);
    const double tau = std::exp(detail::uniform_in(rng, -1.0, 1.0));
    const GpMomentCheck c = gp_moment_check(kappa, tau, k, draws, seed * 1000003ULL + i, z);
    detail::note(r, c.holds, std::abs(c.mc_mean - c.exact) / c.mc_se);
  }
  return r;
}

/// Spacing inequalities on simulated samples with xi0 > 0.
inline SweepResult spacing_sweep(int cases, std::uint64_t seed, std::size_t n = 10000) {
  SweepResult r{"spacing"};
  Philox4x32 rng(seed, 0x5A);
  for (int i = 0; r.cases < cases; ++i) {
    const GevParams th{std::exp(detail::uniform_in(rng, -1.0, 1.0)), detail::uniform_in(rng, -1.0, 1.0),
                       detail::uniform_in(rng, 0.2, 1.5)};
    const Sample s = gev_sample(th, n, seed, 0x5A00 + static_cast<std::uint64_t>(i));
    const MleFit fit = fit_gev(s);
    if (!fit.converged || !(fit.theta_hat.xi > 0.0)) {
      ++r.skipped;
      continue;
    }
    const SpacingCheck c = spacing_bound_check(s, fit, th);
    const double margin = std::max(c.product.lhs_log - c.product.rhs_log, c.part1.rhs_log - c.part1.lhs_log);
    detail::note(r, c.holds, margin);
  }
  return r;
}

}  // namespace gevbayes
