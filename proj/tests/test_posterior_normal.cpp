#include "gevbayes/estimation.hpp"
#include "gevbayes/posterior_normal.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gevbayes;

TEST(RateLimit, Values) {
  EXPECT_NEAR(std::log(bn_rate_limit({1, 0, 0.5})), -1.865824, 1e-6);
  EXPECT_NEAR(bn_rate_limit({1, 0, 0.5}), 0.154769, 1e-6);
  EXPECT_NEAR(bn_rate_limit({2, 0, 0.5}), 0.077384, 1e-6);
  EXPECT_NEAR(bn_rate_limit({1, 0, 0.0}), 0.206549, 1e-6);
}

TEST(BoxProb, Values) {
  EXPECT_DOUBLE_EQ(gaussian_box_prob(Vec3::Constant(-kInf), Vec3::Constant(kInf)), 1.0);
  EXPECT_NEAR(gaussian_box_prob(Vec3::Zero(), Vec3::Constant(kInf)), 0.125, 1e-15);
  const double p1 = 2 * norm_cdf(1.0) - 1;  // 0.682689
  EXPECT_NEAR(gaussian_box_prob(Vec3::Constant(-1), Vec3::Constant(1)), p1 * p1 * p1, 1e-15);
  EXPECT_NEAR(gaussian_box_prob(Vec3::Constant(-1), Vec3::Constant(1)), 0.318178, 1e-6);
  EXPECT_THROW(gaussian_box_prob(Vec3::Constant(1), Vec3::Zero()), std::invalid_argument);
}

TEST(LogBn, TwoRoutesAgreeAtMle) {
  for (double xi : {0.2, 0.5, 1.0}) {
    const Sample s = gev_sample({1.5, -1, xi}, 1000, 31);
    MleOptions o;
    o.tol = 1e-9;
    const MleFit fit = fit_gev(s, o);
    ASSERT_TRUE(fit.converged);
    const PriorSpec pr = flat_prior();
    const double a = log_Bn(fit, pr, s);
    EXPECT_NEAR(a, log_Bn_via_loglik(fit, pr, s), 1e-10 * std::abs(a));
  }
}

TEST(LogBn, RateApproachesLimit) {
  const GevParams theta0{1, 0, 0.5};
  const Sample s = gev_sample(theta0, 20000, 2);
  const MleFit fit = fit_gev(s);
  ASSERT_TRUE(fit.converged);
  EXPECT_NEAR(log_Bn(fit, flat_prior(), s) / s.n(), std::log(bn_rate_limit(theta0)), 0.05);
}

TEST(Laplace, StandardizeRoundTrip) {
  const Sample s = gev_sample({1, 0, 0.3}, 500, 3);
  const MleFit fit = fit_gev(s);
  ASSERT_TRUE(fit.converged);
  const LaplaceFit lf = laplace_fit(fit, flat_prior(), s);
  const Vec3 z(0.3, -1.2, 2.0);
  EXPECT_LT((lf.standardize(lf.unstandardize(z)) - z).norm(), 1e-10);
  EXPECT_LT((lf.standardize(lf.mean)).norm(), 1e-15);
  // precision = R R^T, so standardized covariance is the identity
  const Mat3 R = lf.chol;
  EXPECT_LT((R.transpose() * lf.covariance * R - Mat3::Identity()).norm(), 1e-10);
}

TEST(Laplace, DrawsMatchCovariance) {
  const LaplaceFit lf = laplace_from_moments(Vec3(1, 2, 0.3), Vec3(0.04, 0.09, 0.01).asDiagonal());
  Philox4x32 rng(4);
  Vec3 m = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  const int N = 200000;
  for (int i = 0; i < N; ++i) {
    const Vec3 x = lf.draw(rng) - lf.mean.vec();
    m += x;
    v += x.cwiseProduct(x);
  }
  m /= N;
  v /= N;
  EXPECT_LT(m.cwiseAbs().maxCoeff(), 0.002);
  EXPECT_NEAR(v[0], 0.04, 0.001);
  EXPECT_NEAR(v[1], 0.09, 0.002);
  EXPECT_NEAR(v[2], 0.01, 0.0003);
}
