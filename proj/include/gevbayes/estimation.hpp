#pragma once

#include "gev.hpp"
#include "likelihood.hpp"
#include "numerics.hpp"
#include "specfun.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace gevbayes {

struct MleFit {
  GevParams theta_hat;
  double log_lik_at_max = -kInf;
  Mat3 obs_info = Mat3::Zero();  // -Hessian at theta_hat
  bool converged = false;
  bool hessian_indefinite = false;
  bool used_fallback = false;
  int iterations = 0;
  double grad_norm = kInf;
  std::string status;
};

/// Starting values from probability-weighted moments (Hosking, Wallis and
/// Wood 1985), nudged into the support of the likelihood.
inline GevParams pwm_init(const Sample& s) {
  const std::size_t n = s.n();
  require(n >= 3, "pwm_init: need at least 3 observations");
  const double spread = s.max() - s.min();
  require(spread > 0.0, "pwm_init: degenerate (constant) sample");
  CompensatedSum b0, b1, b2;
  const double nn = static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double x = s[j], jj = static_cast<double>(j);
    b0 += x;
    b1 += x * jj / (nn - 1.0);
    b2 += x * jj * (jj - 1.0) / ((nn - 1.0) * (nn - 2.0));
  }
  const double m0 = b0.value() / nn, m1 = b1.value() / nn, m2 = b2.value() / nn;
  const double l1 = m0, l2 = 2.0 * m1 - m0, l3 = 6.0 * m2 - 6.0 * m1 + m0;
  GevParams p;
  if (!(l2 > 0.0)) {
    p = {spread / 4.0, l1, 0.1};
  } else {
    const double t3 = l3 / l2;
    const double c = 2.0 / (3.0 + t3) - std::log(2.0) / std::log(3.0);
    double k = 7.8590 * c + 2.9554 * c * c;
    k = std::clamp(k, -1.5, 0.49);  // xi = -k in (-0.49, 1.5)
    if (std::abs(k) < 1e-6) {
      p.tau = l2 / std::log(2.0);
      p.mu = l1 - kEulerGamma * p.tau;
    } else {
      const double g = std::tgamma(1.0 + k);
      p.tau = l2 * k / ((1.0 - std::exp2(-k)) * g);
      p.mu = l1 - p.tau * (1.0 - g) / k;
    }
    p.xi = -k;
  }
  if (!(p.tau > 0.0) || !std::isfinite(p.tau)) p.tau = spread / 4.0;
  if (std::abs(p.xi) < 1e-6) p.xi = 1e-6;
  if (p.xi > 0.0) {
    if (p.mu - p.tau / p.xi >= s.min()) p.mu = s.min() - 0.1 * spread + p.tau / p.xi;
  } else {
    if (p.mu - p.tau / p.xi <= s.max()) p.mu = s.max() + 0.1 * spread + p.tau / p.xi;
  }
  return p;
}

struct MleOptions {
  double tol = -1.0;  // gradient-norm tolerance; <= 0 means 1e-8 * n
  int max_iter = 200;
  double xi_lo = -0.5 + 1e-6;
  double xi_hi = 10.0;
};

namespace detail {

inline bool in_box(const GevParams& p, const MleOptions& o) {
  return p.tau > 0.0 && std::isfinite(p.mu) && p.xi > o.xi_lo && p.xi < o.xi_hi;
}

// Minimal Nelder-Mead on a 3-vector objective (minimized).
template <class F>
Vec3 nelder_mead(F&& f, Vec3 x0, Vec3 step, int max_eval, double ftol) {
  std::array<Vec3, 4> x;
  std::array<double, 4> fx;
  x[0] = x0;
  for (int i = 0; i < 3; ++i) {
    x[i + 1] = x0;
    x[i + 1][i] += step[i];
  }
  for (int i = 0; i < 4; ++i) fx[i] = f(x[i]);
  int evals = 4;
  while (evals < max_eval) {
    std::array<int, 4> idx = {0, 1, 2, 3};
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fx[a] < fx[b]; });
    auto xs = x;
    auto fs = fx;
    for (int i = 0; i < 4; ++i) x[i] = xs[idx[i]], fx[i] = fs[idx[i]];
    if (std::abs(fx[3] - fx[0]) <= ftol * (std::abs(fx[0]) + 1e-300) && std::isfinite(fx[3])) break;
    const Vec3 c = (x[0] + x[1] + x[2]) / 3.0;
    const Vec3 xr = c + (c - x[3]);
    const double fr = f(xr);
    ++evals;
    if (fr < fx[0]) {
      const Vec3 xe = c + 2.0 * (c - x[3]);
      const double fe = f(xe);
      ++evals;
      if (fe < fr)
        x[3] = xe, fx[3] = fe;
      else
        x[3] = xr, fx[3] = fr;
    } else if (fr < fx[2]) {
      x[3] = xr, fx[3] = fr;
    } else {
      const Vec3 xc = fr < fx[3] ? Vec3(c + 0.5 * (xr - c)) : Vec3(c + 0.5 * (x[3] - c));
      const double fc = f(xc);
      ++evals;
      if (fc < std::min(fr, fx[3])) {
        x[3] = xc, fx[3] = fc;
      } else {
        for (int i = 1; i < 4; ++i) {
          x[i] = x[0] + 0.5 * (x[i] - x[0]);
          fx[i] = f(x[i]);
          ++evals;
        }
      }
    }
  }
  int best = 0;
  for (int i = 1; i < 4; ++i)
    if (fx[i] < fx[best]) best = i;
  return x[best];
}

inline bool negative_definite(const Mat3& h) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(h);
  return es.eigenvalues().maxCoeff() < 0.0;
}

}  // namespace detail

/// Local MLE by damped Newton with Armijo backtracking that never leaves the
/// support; falls back to Nelder-Mead if Newton stalls.
inline MleFit local_mle(const Sample& s, const GevParams& init, MleOptions opt = {}) {
  require(s.n() >= 2, "local_mle: need at least 2 observations");
  require(init.valid() && omega_contains(init, s), "local_mle: initial value outside the support");
  const double tol = opt.tol > 0.0 ? opt.tol : 1e-8 * static_cast<double>(s.n());
  MleFit fit;
  GevParams th = init;
  if (!detail::in_box(th, opt)) th.xi = std::clamp(th.xi, opt.xi_lo + 1e-6, opt.xi_hi - 1e-6);
  if (!omega_contains(th, s)) throw SupportError("local_mle: initial value outside the support");
  bool fallback_done = false;
  LogLikDerivs d = loglik_derivatives(th, s);
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    const double gn = d.grad.norm();
    if (gn < tol && detail::negative_definite(d.hess)) break;
    Eigen::SelfAdjointEigenSolver<Mat3> es(-d.hess);
    Vec3 lam = es.eigenvalues();
    const double floor = 1e-10 * std::max(1.0, lam.cwiseAbs().maxCoeff());
    for (int j = 0; j < 3; ++j) lam[j] = std::max(std::abs(lam[j]), floor);
    const Mat3& V = es.eigenvectors();
    const Vec3 step = V * (V.transpose() * d.grad).cwiseQuotient(lam);
    const double slope = d.grad.dot(step);
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
      const GevParams trial = GevParams::from_vec(th.vec() + alpha * step);
      if (!detail::in_box(trial, opt) || !omega_contains(trial, s)) continue;
      const double ll = log_likelihood(trial, s);
      if (!std::isfinite(ll)) continue;
      if (ll >= d.value + 1e-4 * alpha * slope) {
        th = trial;
        d = loglik_derivatives(th, s);
        accepted = true;
        break;
      }
      // at the optimum rounding hides the increase; accept if the gradient shrinks
      if (ll >= d.value - 1e-12 * std::abs(d.value)) {
        const LogLikDerivs dt = loglik_derivatives(trial, s);
        if (dt.grad.norm() < gn) {
          th = trial;
          d = dt;
          accepted = true;
          break;
        }
      }
    }
    if (accepted) continue;
    if (fallback_done) break;
    // Newton stalled: Nelder-Mead in (log tau, mu, xi), then resume Newton
    fallback_done = true;
    fit.used_fallback = true;
    auto negll = [&](const Vec3& v) {
      const GevParams p{std::exp(v[0]), v[1], v[2]};
      if (!detail::in_box(p, opt)) return kInf;
      const double ll = log_likelihood(p, s);
      return std::isfinite(ll) ? -ll : kInf;
    };
    const Vec3 v0(std::log(th.tau), th.mu, th.xi);
    const Vec3 st(0.1, 0.1 * th.tau, 0.05);
    const Vec3 v = detail::nelder_mead(negll, v0, st, 4000, 1e-15);
    const GevParams cand{std::exp(v[0]), v[1], v[2]};
    if (std::isfinite(negll(v)) && -negll(v) >= d.value) {
      th = cand;
      d = loglik_derivatives(th, s);
    }
  }
  fit.theta_hat = th;
  fit.log_lik_at_max = d.value;
  fit.obs_info = -d.hess;
  fit.iterations = it;
  fit.grad_norm = d.grad.norm();
  fit.hessian_indefinite = !detail::negative_definite(d.hess);
  fit.converged = fit.grad_norm < tol && !fit.hessian_indefinite;
  if (fit.converged)
    fit.status = "converged";
  else if (fit.hessian_indefinite)
    fit.status = "hessian-indefinite";
  else
    fit.status = "not-converged";
  return fit;
}

inline MleFit local_mle(const Sample& s, const GevParams& init, double tol) {
  MleOptions o;
  o.tol = tol;
  return local_mle(s, init, o);
}

/// PWM start followed by local_mle.
inline MleFit fit_gev(const Sample& s, MleOptions opt = {}) { return local_mle(s, pwm_init(s), opt); }

struct ObservedInfo {
  Mat3 info;
  Mat3 inverse;
  double log_det = 0.0;
  double log_det_inverse = 0.0;
  double c1_statistic = 0.0;      // largest eigenvalue of the inverse
  double min_eig_inverse = 0.0;
};

inline ObservedInfo observed_info(const Mat3& info) {
  Eigen::LLT<Mat3> llt(info);
  if (llt.info() != Eigen::Success) throw NumericalError("observed_info: matrix is not positive definite");
  ObservedInfo o;
  o.info = info;
  o.inverse = llt.solve(Mat3::Identity());
  o.inverse = 0.5 * (o.inverse + o.inverse.transpose()).eval();
  const Mat3 L = llt.matrixL();
  o.log_det = 2.0 * L.diagonal().array().log().sum();
  o.log_det_inverse = -o.log_det;
  Eigen::SelfAdjointEigenSolver<Mat3> es(o.inverse);
  o.c1_statistic = es.eigenvalues().maxCoeff();
  o.min_eig_inverse = es.eigenvalues().minCoeff();
  return o;
}

inline ObservedInfo observed_info(const MleFit& fit) {
  require(fit.converged, "observed_info: fit did not converge");
  return observed_info(fit.obs_info);
}

namespace detail {

inline Mat3 expected_info_direct(double tau, double xi) {
  using LD = long double;
  const auto polys = hessian_polys<LD>(static_cast<LD>(tau), static_cast<LD>(xi));
  std::array<double, 6> e;
  for (int j = 0; j < 6; ++j)
    e[j] = -static_cast<double>(polys[j].eval([&](int k, int a, int b) { return sum_stat_limit<LD>(xi, k, a, b); }));
  return unpack_sym(e);
}

}  // namespace detail

/// Per-observation Fisher information at theta0, with each sum_stat
/// replaced by its almost-sure limit.
inline Mat3 expected_info_limit(const GevParams& theta0) {
  require(theta0.valid(), "expected_info_limit: invalid parameters");
  require(theta0.xi > -0.5, "expected_info_limit: requires xi0 > -1/2");
  constexpr double band = 0.02;
  if (std::abs(theta0.xi) >= band) return detail::expected_info_direct(theta0.tau, theta0.xi);
  // cancellation near xi = 0: Lagrange interpolation from nodes outside the band
  static constexpr std::array<double, 8> nodes = {-0.08, -0.06, -0.04, -0.02, 0.02, 0.04, 0.06, 0.08};
  Mat3 out = Mat3::Zero();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    double wgt = 1.0;
    for (std::size_t j = 0; j < nodes.size(); ++j)
      if (j != i) wgt *= (theta0.xi - nodes[j]) / (nodes[i] - nodes[j]);
    out += wgt * detail::expected_info_direct(theta0.tau, nodes[i]);
  }
  return out;
}

}  // namespace gevbayes
