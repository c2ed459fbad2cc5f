#pragma once

#include "estimation.hpp"
#include "gev.hpp"
#include "likelihood.hpp"
#include "priors.hpp"
#include "rng.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace gevbayes {

/// Normal approximation to the posterior centred at the MLE.
struct LaplaceFit {
  GevParams mean;
  Mat3 precision;   // observed information
  Mat3 covariance;  // its inverse
  Mat3 chol;        // lower factor R with precision = R R^T
  double log_Bn = kNaN;

  /// z = R^T (theta - mean); standard normal under the approximation.
  Vec3 standardize(const GevParams& th) const { return chol.transpose() * (th.vec() - mean.vec()); }
  Vec3 standardize(const Vec3& th) const { return chol.transpose() * (th - mean.vec()); }
  /// Inverse of standardize.
  Vec3 unstandardize(const Vec3& z) const {
    return mean.vec() + chol.transpose().triangularView<Eigen::Upper>().solve(z);
  }
  Vec3 draw(Philox4x32& rng) const { return unstandardize(Vec3(rng.normal(), rng.normal(), rng.normal())); }
};

/// log of (2 pi)^{3/2} |obs_info|^{-1/2} pi(theta) tau^{-n} e^{-n} prod w_i^{-1-1/xi}.
inline double log_Bn(const MleFit& fit, const PriorSpec& pr, const Sample& s) {
  require(fit.converged, "log_Bn: fit did not converge");
  const GevParams& th = fit.theta_hat;
  if (!omega_contains(th, s)) throw SupportError("log_Bn: some w_i <= 0 at the fitted parameters");
  const ObservedInfo oi = observed_info(fit);
  const double n = static_cast<double>(s.n());
  CompensatedSum sum_h;  // sum (1 + xi) h_i = sum (1 + 1/xi) log w_i
  for (double y : s) sum_h += shape_h(th.xi, (y - th.mu) / th.tau);
  return 1.5 * kLog2Pi - 0.5 * oi.log_det + log_prior(pr, th) - n * std::log(th.tau) - n -
         (1.0 + th.xi) * sum_h.value();
}

/// Same quantity through L_n(theta_hat); equal to log_Bn when the score
/// identity sum w_i^{-1/xi} = n holds.
inline double log_Bn_via_loglik(const MleFit& fit, const PriorSpec& pr, const Sample& s) {
  const ObservedInfo oi = observed_info(fit);
  return 1.5 * kLog2Pi - 0.5 * oi.log_det + log_prior(pr, fit.theta_hat) + log_likelihood(fit.theta_hat, s);
}

inline LaplaceFit laplace_fit(const MleFit& fit, const PriorSpec& pr, const Sample& s) {
  require(fit.converged, "laplace_fit: fit did not converge");
  LaplaceFit lf;
  lf.mean = fit.theta_hat;
  lf.precision = fit.obs_info;
  Eigen::LLT<Mat3> llt(lf.precision);
  if (llt.info() != Eigen::Success) throw NumericalError("laplace_fit: information matrix is not positive definite");
  lf.chol = llt.matrixL();
  lf.covariance = llt.solve(Mat3::Identity());
  lf.log_Bn = log_Bn(fit, pr, s);
  return lf;
}

/// Laplace fit from arbitrary mean and covariance (used for self-standardization).
inline LaplaceFit laplace_from_moments(const Vec3& mean, const Mat3& cov) {
  LaplaceFit lf;
  lf.mean = GevParams::from_vec(mean);
  lf.covariance = cov;
  lf.precision = cov.inverse();
  Eigen::LLT<Mat3> llt(lf.precision);
  if (llt.info() != Eigen::Success) throw NumericalError("laplace_from_moments: covariance is not positive definite");
  lf.chol = llt.matrixL();
  return lf;
}

/// tau0^{-1} exp(-(xi0 gamma + gamma + 1)), the almost-sure limit of B_n^{1/n}.
inline double bn_rate_limit(const GevParams& theta0) {
  require(theta0.valid(), "bn_rate_limit: invalid parameters");
  return std::exp(-(theta0.xi * kEulerGamma + kEulerGamma + 1.0)) / theta0.tau;
}

/// Per-coordinate probabilities Phi(b_j) - Phi(a_j).
inline Vec3 gaussian_interval_probs(const Vec3& a, const Vec3& b) {
  Vec3 out;
  for (int j = 0; j < 3; ++j) {
    require(!(a[j] > b[j]), "gaussian_box_prob: need a <= b");
    // use the upper tail on the right half to keep precision
    if (a[j] >= 0.0)
      out[j] = norm_cdf(-a[j]) - norm_cdf(-b[j]);
    else
      out[j] = norm_cdf(b[j]) - norm_cdf(a[j]);
  }
  return out;
}

/// Standard trivariate normal probability of the box [a, b].
inline double gaussian_box_prob(const Vec3& a, const Vec3& b) { return gaussian_interval_probs(a, b).prod(); }

}  // namespace gevbayes
