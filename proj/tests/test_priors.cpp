#include "gevbayes/priors.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gevbayes;

TEST(Prior, FlatValues) {
  const PriorSpec pr = flat_prior();
  EXPECT_NEAR(log_prior(pr, {2, 0, 0.3}), -std::log(2.0), 1e-15);
  EXPECT_EQ(log_prior(pr, {1, 0, -0.6}), -kInf);
  EXPECT_EQ(log_prior(pr, {-1, 0, 0.1}), -kInf);
}

TEST(Prior, CustomDecay) {
  const PriorSpec pr = custom_prior("cauchy", [](double xi) { return -std::log1p(xi * xi); }, -2.0);
  EXPECT_NEAR(log_prior(pr, {1, 0, 1.0}), -std::log(2.0), 1e-15);
  const Condition1Report rep = validate_condition1(pr);
  EXPECT_TRUE(rep.bounded_ok);
  EXPECT_TRUE(rep.rv_ok);
  EXPECT_NEAR(rep.rv_index_estimate, -2.0, 0.01);
}

TEST(Prior, ExponentialGrowthIsNotRegularlyVarying) {
  const PriorSpec pr = custom_prior("exp", [](double xi) { return xi; }, kNaN);
  EXPECT_FALSE(validate_condition1(pr).rv_ok);
}

TEST(Prior, UnboundedNearLowerEdgeIsRejected) {
  const PriorSpec pr = custom_prior("edge", [](double xi) { return -std::log(xi + 0.5); }, 0.0);
  EXPECT_FALSE(validate_condition1(pr).bounded_ok);
}

TEST(Prior, BuiltinsSatisfyCondition) {
  for (const PriorSpec& pr : {flat_prior(), power_prior(1.5), power_prior(-2.0), expdecay_prior(1.0, 5.0)}) {
    const Condition1Report rep = validate_condition1(pr);
    EXPECT_TRUE(rep.bounded_ok) << pr.name;
    EXPECT_TRUE(rep.rv_ok) << pr.name;
    EXPECT_NEAR(rep.rv_index_estimate, pr.alpha, 0.05) << pr.name;
  }
}

TEST(Prior, WrongDeclaredIndexFails) {
  const PriorSpec pr = custom_prior("lie", [](double xi) { return 2.0 * std::log1p(xi); }, 0.0);
  EXPECT_FALSE(validate_condition1(pr).rv_ok);
}

TEST(Prior, ProperNormalIntegratesTruncation) {
  const PriorSpec pr = normal_proper_prior(0, 1, 0, 10, 0, 0.5);
  EXPECT_FALSE(pr.scale_invariant());
  EXPECT_EQ(log_prior(pr, {1, 0, -0.7}), -kInf);
  // xi marginal at 0: N(0; 0, 0.5) / P(xi > -1/2)
  const double expect = -std::log(0.5) - 0.5 * kLog2Pi - std::log(norm_cdf(1.0));
  const double lt_mu = -0.5 * kLog2Pi + (-std::log(10.0) - 0.5 * kLog2Pi);
  EXPECT_NEAR(log_prior(pr, {1, 0, 0}), expect + lt_mu, 1e-12);
  EXPECT_THROW(validate_condition1(pr), std::invalid_argument);
}
