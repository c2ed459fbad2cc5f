#pragma once

#include "estimation.hpp"
#include "gev.hpp"
#include "likelihood.hpp"
#include "posterior_normal.hpp"
#include "priors.hpp"
#include "rng.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace gevbayes {

struct McmcOptions {
  std::size_t n_iter = 20000;   // total iterations, burn-in included
  std::size_t burn_in = 5000;
  std::uint64_t seed = 1;
  double target_accept = 0.234;
  std::size_t adapt_start = 200;  // burn-in iterations before the empirical covariance is used
};

/// Post-burn-in draws of the exact posterior.
struct Chain {
  std::vector<GevParams> draws;
  std::vector<double> log_posts;  // unnormalized
  double acceptance_rate = 0.0;   // after burn-in
  std::uint64_t seed = 0;
  std::size_t burn_in = 0;
  Mat3 proposal_cov = Mat3::Identity();  // frozen proposal in (log tau, mu, xi)
};

/// Random-walk Metropolis output on a generic target over R^3.
struct RwmResult {
  std::vector<Vec3> draws;
  std::vector<double> log_targets;
  double acceptance_rate = 0.0;
  Mat3 proposal_cov = Mat3::Identity();
};

/// Adaptive random-walk Metropolis on R^3.
///
/// During burn-in the proposal is lambda * 2.38^2/3 * (empirical covariance),
/// with log lambda moved by a Robbins-Monro step toward the target
/// acceptance rate. Both are frozen afterwards, so the retained draws come
/// from a fixed Markov kernel.
inline RwmResult adaptive_rwm(const std::function<double(const Vec3&)>& log_target, const Vec3& start,
                              const Mat3& init_cov, const McmcOptions& opt) {
  require(opt.n_iter > opt.burn_in, "sample_posterior: n_iter must exceed burn_in");
  Philox4x32 rng(opt.seed);
  const double base = 2.38 * 2.38 / 3.0;
  Vec3 x = start;
  double lx = log_target(x);
  if (!(lx > -kInf)) throw NumericalError("sample_posterior: start point has zero target density");

  Mat3 cov = init_cov;
  double log_lambda = 0.0;
  auto factor = [&](const Mat3& c) -> Mat3 {
    Mat3 m = c;
    for (int jitter = 0; jitter < 20; ++jitter) {
      Eigen::LLT<Mat3> llt(m);
      if (llt.info() == Eigen::Success) return llt.matrixL();
      m += Mat3::Identity() * (1e-10 + 1e-8 * m.diagonal().cwiseAbs().maxCoeff()) * std::pow(10.0, jitter);
    }
    throw NumericalError("sample_posterior: proposal covariance is not positive definite");
  };
  Mat3 L = factor(base * cov);

  // running moments of the burn-in path
  Vec3 mean = x;
  Mat3 m2 = Mat3::Zero();
  std::size_t count = 1;

  RwmResult out;
  out.draws.reserve(opt.n_iter - opt.burn_in);
  out.log_targets.reserve(opt.n_iter - opt.burn_in);
  std::size_t accepted = 0;

  for (std::size_t it = 0; it < opt.n_iter; ++it) {
    const Vec3 y = x + std::exp(0.5 * log_lambda) * L * Vec3(rng.normal(), rng.normal(), rng.normal());
    const double ly = log_target(y);
    const double log_u = std::log(rng.uniform());
    const bool acc = ly > -kInf && log_u < ly - lx;
    const double alpha = ly > -kInf ? std::exp(std::min(ly - lx, 0.0)) : 0.0;
    if (acc) {
      x = y;
      lx = ly;
    }
    if (it < opt.burn_in) {
      log_lambda += std::pow(static_cast<double>(it + 1), -0.6) * (alpha - opt.target_accept);
      log_lambda = std::clamp(log_lambda, -20.0, 10.0);
      ++count;
      const Vec3 d = x - mean;
      mean += d / static_cast<double>(count);
      m2 += d * (x - mean).transpose();
      if (count > opt.adapt_start) cov = m2 / static_cast<double>(count - 1);
      if (count > opt.adapt_start && (it % 50 == 0 || it + 1 == opt.burn_in)) L = factor(base * cov);
    } else {
      accepted += acc ? 1 : 0;
      out.draws.push_back(x);
      out.log_targets.push_back(lx);
    }
  }
  out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(opt.n_iter - opt.burn_in);
  out.proposal_cov = std::exp(log_lambda) * L * L.transpose();
  return out;
}

/// Log posterior (up to C_n) in the sampling coordinates u = (log tau, mu, xi),
/// including the Jacobian tau. Outside Omega_n or Theta it is -inf.
inline double log_posterior_u(const Vec3& u, const Sample& s, const PriorSpec& pr) {
  if (!std::isfinite(u[0]) || !(u[2] > -0.5)) return -kInf;
  const GevParams p{std::exp(u[0]), u[1], u[2]};
  if (!(p.tau > 0.0) || !std::isfinite(p.tau)) return -kInf;
  const double lp = log_prior(pr, p);
  if (!(lp > -kInf)) return -kInf;
  const double ll = log_likelihood(p, s);
  if (!(ll > -kInf)) return -kInf;
  return ll + lp + u[0];
}

/// Adaptive random-walk Metropolis for the posterior likelihood x prior.
///
/// Starts at the MLE when the fit converges, else at the PWM estimate.
inline Chain sample_posterior(const Sample& s, const PriorSpec& pr, const McmcOptions& opt,
                              const MleFit* fit = nullptr) {
  require(opt.n_iter > opt.burn_in, "sample_posterior: n_iter must exceed burn_in");
  std::optional<MleFit> own;
  if (fit == nullptr) {
    try {
      own = fit_gev(s);
      fit = &*own;
    } catch (const std::exception&) {
      fit = nullptr;
    }
  }
  auto lt = [&](const Vec3& u) { return log_posterior_u(u, s, pr); };

  std::vector<GevParams> starts;
  if (fit != nullptr && fit->converged) starts.push_back(fit->theta_hat);
  try {
    starts.push_back(pwm_init(s));
  } catch (const std::exception&) {
  }
  const double spread = std::max(s.max() - s.min(), 1e-6);
  starts.push_back({spread, s.min() + 0.5 * spread, 0.1});
  starts.push_back({spread, s.max(), 0.0});

  std::optional<Vec3> start;
  for (const GevParams& p : starts) {
    const Vec3 u(std::log(p.tau), p.mu, p.xi);
    if (lt(u) > -kInf) {
      start = u;
      break;
    }
  }
  if (!start) throw NumericalError("sample_posterior: no starting point inside the support");

  Mat3 init = Mat3::Zero();
  bool have_init = false;
  if (fit != nullptr && fit->converged) {
    Eigen::LLT<Mat3> llt(fit->obs_info);
    if (llt.info() == Eigen::Success) {
      const Mat3 cov = llt.solve(Mat3::Identity());
      const Vec3 jd(1.0 / fit->theta_hat.tau, 1.0, 1.0);
      init = jd.asDiagonal() * cov * jd.asDiagonal();
      have_init = true;
    }
  }
  if (!have_init) {
    const double sn = 1.0 / std::sqrt(static_cast<double>(s.n()));
    init = Vec3(sn * sn, spread * spread * sn * sn, sn * sn).asDiagonal();
  }

  const RwmResult r = adaptive_rwm(lt, *start, init, opt);
  Chain c;
  c.seed = opt.seed;
  c.burn_in = opt.burn_in;
  c.acceptance_rate = r.acceptance_rate;
  c.proposal_cov = r.proposal_cov;
  c.log_posts = r.log_targets;
  c.draws.reserve(r.draws.size());
  for (const Vec3& u : r.draws) c.draws.push_back({std::exp(u[0]), u[1], u[2]});
  return c;
}

inline Chain sample_posterior(const Sample& s, const PriorSpec& pr, std::size_t n_iter, std::size_t burn_in,
                              std::uint64_t seed) {
  McmcOptions o;
  o.n_iter = n_iter;
  o.burn_in = burn_in;
  o.seed = seed;
  return sample_posterior(s, pr, o);
}

/// z = R^T (theta - theta_hat) for every draw.
inline std::vector<Vec3> standardize_draws(const Chain& c, const LaplaceFit& lf) {
  Eigen::LLT<Mat3> llt(lf.precision);
  if (llt.info() != Eigen::Success) throw NumericalError("standardize_draws: precision is not positive definite");
  std::vector<Vec3> z;
  z.reserve(c.draws.size());
  for (const GevParams& p : c.draws) z.push_back(lf.standardize(p));
  return z;
}

/// Sample mean and covariance of a set of 3-vectors.
inline std::pair<Vec3, Mat3> sample_moments(const std::vector<Vec3>& xs) {
  require(xs.size() >= 2, "sample_moments: need at least two points");
  Vec3 mean = Vec3::Zero();
  for (const Vec3& x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  Mat3 cov = Mat3::Zero();
  for (const Vec3& x : xs) cov += (x - mean) * (x - mean).transpose();
  cov /= static_cast<double>(xs.size() - 1);
  return {mean, cov};
}

inline std::vector<Vec3> chain_vectors(const Chain& c) {
  std::vector<Vec3> v;
  v.reserve(c.draws.size());
  for (const GevParams& p : c.draws) v.push_back(p.vec());
  return v;
}

/// Effective sample size from the integrated autocorrelation, truncated by
/// Geyer's initial monotone sequence.
inline double effective_sample_size(const std::vector<double>& x) {
  const std::size_t n = x.size();
  require(n >= 4, "effective_sample_size: need at least 4 values");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  auto autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += (x[i] - mean) * (x[i + lag] - mean);
    return acc / static_cast<double>(n);
  };
  const double g0 = autocov(0);
  if (!(g0 > 0.0)) return static_cast<double>(n);
  double sum = 0.0, prev = kInf;
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    double pair = (autocov(2 * m) + autocov(2 * m + 1)) / g0;
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);
    prev = pair;
    sum += pair;
  }
  const double tau_int = std::max(2.0 * sum - 1.0, 1.0 / static_cast<double>(n));
  return static_cast<double>(n) / tau_int;
}

inline double effective_sample_size(const std::vector<Vec3>& xs, int coord) {
  std::vector<double> v;
  v.reserve(xs.size());
  for (const Vec3& x : xs) v.push_back(x[coord]);
  return effective_sample_size(v);
}

}  // namespace gevbayes
