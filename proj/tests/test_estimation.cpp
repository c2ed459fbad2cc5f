#include "gevbayes/estimation.hpp"
#include "gevbayes/likelihood.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gevbayes;

TEST(Pwm, InsideSupport) {
  for (double xi : {-0.3, 0.0, 0.3, 1.0, 2.5}) {
    const Sample s = gev_sample({1, 0, xi}, 300, 17);
    const GevParams p = pwm_init(s);
    EXPECT_TRUE(p.in_theta());
    EXPECT_GT(log_likelihood(p, s), -kInf);
  }
}

TEST(Mle, ConsistentAtLargeN) {
  const GevParams theta0{2.0, 1.0, 0.3};
  const Sample s = gev_sample(theta0, 50000, 3);
  const MleFit fit = fit_gev(s);
  ASSERT_TRUE(fit.converged) << fit.status;
  EXPECT_NEAR(fit.theta_hat.tau, 2.0, 0.05);
  EXPECT_NEAR(fit.theta_hat.mu, 1.0, 0.05);
  EXPECT_NEAR(fit.theta_hat.xi, 0.3, 0.03);
  EXPECT_LT(score(fit.theta_hat, s).norm(), 1e-8 * s.n());
}

TEST(Mle, NegativeDefiniteHessianOverShapes) {
  for (double xi : {-0.25, 0.0, 0.2, 0.5, 1.0}) {
    const Sample s = gev_sample({1, 0, xi}, 1000, 5);
    const MleFit fit = fit_gev(s);
    ASSERT_TRUE(fit.converged) << "xi0=" << xi << " " << fit.status;
    EXPECT_TRUE(detail::negative_definite(hessian(fit.theta_hat, s)));
    const ObservedInfo oi = observed_info(fit);
    EXPECT_GT(oi.min_eig_inverse, 0.0);
  }
}

TEST(Mle, RestartFromOptimumIsImmediate) {
  const Sample s = gev_sample({1, 0, 0.4}, 2000, 6);
  const MleFit a = fit_gev(s);
  ASSERT_TRUE(a.converged);
  const MleFit b = local_mle(s, a.theta_hat);
  EXPECT_TRUE(b.converged);
  EXPECT_LE(b.iterations, 2);
  EXPECT_LT((a.theta_hat.vec() - b.theta_hat.vec()).norm(), 1e-8);
}

TEST(Mle, Deterministic) {
  const Sample s = gev_sample({1, 0, 0.4}, 500, 9);
  const MleFit a = fit_gev(s), b = fit_gev(s);
  EXPECT_EQ(a.theta_hat, b.theta_hat);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(ExpectedInfo, MatchesObservedPerObservation) {
  const GevParams theta0{1, 0, 0.3};
  const Sample s = gev_sample(theta0, 100000, 12);
  const MleFit fit = fit_gev(s);
  ASSERT_TRUE(fit.converged);
  const Mat3 e = expected_info_limit(theta0);
  const Mat3 o = fit.obs_info / static_cast<double>(s.n());
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(o(i, j), e(i, j), 0.03 * e.cwiseAbs().maxCoeff()) << i << j;
}

TEST(ExpectedInfo, GumbelBandIsSmooth) {
  const Mat3 a = expected_info_limit({1, 0, 0.0});
  const Mat3 b = expected_info_limit({1, 0, 0.021});
  const Mat3 c = expected_info_limit({1, 0, 0.019});
  EXPECT_LT((b - c).norm(), 0.01 * a.norm());
  // Gumbel: I_tau,tau = ((1 - gamma)^2 + pi^2/6) / tau^2
  const double g = kEulerGamma;
  EXPECT_NEAR(a(0, 0), (1 - g) * (1 - g) + kPi * kPi / 6, 1e-6);
  EXPECT_NEAR(a(1, 1), 1.0, 1e-6);
}

TEST(ObservedInfo, C1IsLargestEigenvalueOfInverse) {
  Mat3 info = Mat3::Zero();
  info.diagonal() << 4.0, 2.0, 0.5;
  const ObservedInfo oi = observed_info(info);
  EXPECT_NEAR(oi.c1_statistic, 2.0, 1e-14);
  EXPECT_NEAR(oi.min_eig_inverse, 0.25, 1e-14);
  EXPECT_NEAR(oi.log_det, std::log(4.0), 1e-14);
  EXPECT_THROW(observed_info(Mat3(-Mat3::Identity())), NumericalError);
}
