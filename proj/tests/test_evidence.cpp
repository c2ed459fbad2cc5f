#include "gevbayes/estimation.hpp"
#include "gevbayes/evidence.hpp"
#include "gevbayes/posterior_normal.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <gtest/gtest.h>

#include <cmath>

using namespace gevbayes;

TEST(ReducedIntegrand, RejectsOutsideSupport) {
  const Sample s = gev_sample({1, 0, 0.5}, 20, 1);
  EXPECT_THROW(reduced_integrand_log(s.min() + 0.1, 0.5, s, flat_prior()), SupportError);
  EXPECT_TRUE(std::isfinite(reduced_integrand_log(s.min() - 0.1, 0.5, s, flat_prior())));
  EXPECT_THROW(reduced_integrand_log(s.min() - 0.1, 0.0, s, flat_prior()), std::invalid_argument);
}

// With one observation C_n diverges under the 1/tau prior, so the check uses
// n = 3 on a compact xi window, against nested quadrature in (tau, mu, xi).
TEST(ReducedIntegrand, MatchesTauQuadrature) {
  using boost::math::quadrature::exp_sinh;
  const Sample s(std::vector<double>{-0.3, 0.4, 1.9, 0.1, 0.8});
  const PriorSpec pr = flat_prior();
  const ReducedIntegrand ri(s, pr);
  // the oracle probes the support edges, where the log-density is not finite
  auto dens = [](double lf) { return std::isfinite(lf) ? std::exp(lf) : 0.0; };
  for (double xi : {-0.4, -0.1, 0.05, 0.3, 1.0, 2.5}) {
    for (double x : {-2.0, 0.0, 1.5}) {
      const double D = std::exp(x);
      const double beta = xi > 0 ? s.min() - D : s.max() + D;
      exp_sinh<double> q;
      const double tau_int = q.integrate(
          [&](double tau) { return dens(log_likelihood({tau, beta + tau / xi, xi}, s) + pr.log_g(xi)) / tau; },
          1e-12);
      EXPECT_NEAR(std::exp(ri.eval(xi, x).f) / (D * tau_int), 1.0, 1e-8) << "xi=" << xi << " x=" << x;
    }
  }
}

TEST(LogCn, AffineEquivariance) {
  const Sample s = gev_sample({1, 0, 0.4}, 40, 2);
  std::vector<double> t;
  for (double y : s) t.push_back(2 * y + 3);
  const Sample s2(t);
  const double a = log_Cn(s, flat_prior(), 1e-8).log_Cn;
  const double b = log_Cn(s2, flat_prior(), 1e-8).log_Cn;
  // -n log 2 from the likelihood, +log 2 from the 1/tau prior measure
  EXPECT_NEAR(b - a, -(s.n() - 1.0) * std::log(2.0), 1e-6);
}

TEST(LogCn, AboveLaplaceLowerBound) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const Sample s = gev_sample({1, 0, 0.5}, 200, seed);
    const MleFit fit = fit_gev(s);
    ASSERT_TRUE(fit.converged);
    const EvidenceResult r = log_Cn(s, flat_prior(), 1e-6);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.method, EvidenceMethod::Reduced2D);
    EXPECT_GE(r.log_Cn, log_Bn(fit, flat_prior(), s) - 1e-4);
    EXPECT_LT(r.abs_err_log, 1e-5);
  }
}

TEST(LogCn, TighterToleranceStable) {
  const Sample s = gev_sample({1, 0, 0.3}, 100, 4);
  const double a = log_Cn(s, flat_prior(), 1e-5).log_Cn;
  const double b = log_Cn(s, flat_prior(), 1e-9).log_Cn;
  EXPECT_NEAR(a, b, 3e-5);
}

TEST(LogCn, PiecesAddUp) {
  const Sample s = gev_sample({1, 0, 0.1}, 60, 5);
  const EvidenceResult r = log_Cn(s, flat_prior(), 1e-8);
  LogSumExp acc;
  acc.add(r.log_pos);
  acc.add(r.log_neg);
  acc.add(r.log_seam);
  EXPECT_NEAR(acc.value(), r.log_Cn, 1e-12);
  EXPECT_GT(r.log_neg, -kInf);
  EXPECT_GT(r.xi_max, 10.0);
}

TEST(LogCn, ReducedMatchesFull3dSmallN) {
  const Sample s = gev_sample({1, 0, 0.5}, 15, 6);
  const double a = log_Cn(s, power_prior(1.0), 1e-8).log_Cn;
  EvidenceOptions o;
  o.tol = 1e-8;
  o.full3d = true;
  const EvidenceResult b = log_Cn(s, power_prior(1.0), o);
  EXPECT_EQ(b.method, EvidenceMethod::Full3D);
  EXPECT_LT(std::abs(a - b.log_Cn) / std::abs(a), 1e-3);
  EXPECT_NEAR(a, b.log_Cn, 1e-6);
}

TEST(LogCn, ProperPriorUsesFull3d) {
  const Sample s = gev_sample({1, 0, 0.3}, 12, 7);
  const EvidenceResult r = log_Cn(s, normal_proper_prior(0, 1, 0, 5, 0, 1), 1e-7);
  EXPECT_EQ(r.method, EvidenceMethod::Full3D);
  EXPECT_TRUE(std::isfinite(r.log_Cn));
}

TEST(LogCn, TooFewObservations) {
  const Sample s(std::vector<double>{0.0, 1.0});
  EXPECT_THROW(log_Cn(s, flat_prior(), 1e-6), std::invalid_argument);
}

TEST(RegionRadii, UnitShapeExample) {
  const RegionRadii rr = region_radii({1, 0, 1.0});
  EXPECT_NEAR(rr.r1, 1.01 * std::expm1(4.0 - std::log(2.0) + kEulerGamma), 1e-9);
  EXPECT_NEAR(rr.r1, 47.62 * 1.01, 0.01);
  EXPECT_DOUBLE_EQ(rr.r2, 1.01);
  EXPECT_TRUE(radii_valid(rr, {1, 0, 1.0}));
  RegionRadii bad = rr;
  bad.r1 = 40.0;
  EXPECT_FALSE(radii_valid(bad, {1, 0, 1.0}));
  EXPECT_THROW(region_radii({1, 0, -0.1}), std::invalid_argument);
}

TEST(RegionRadii, SmallShapeKeepsLogRadius) {
  const RegionRadii rr = region_radii({1, 0, 0.05});
  EXPECT_TRUE(std::isfinite(rr.log_r3));
  EXPECT_TRUE(radii_valid(rr, {1, 0, 0.05}));
}

TEST(RegionMasses, AddUpToEvidence) {
  const Sample s = gev_sample({1, 0, 0.5}, 300, 8);
  const MleFit fit = fit_gev(s);
  ASSERT_TRUE(fit.converged);
  ASSERT_GT(fit.theta_hat.xi, 0.2);
  const RegionRadii rr = region_radii(fit.theta_hat);
  const RegionMasses m = region_masses(s, flat_prior(), rr, fit, 1e-8);
  const double cn = log_Cn(s, flat_prior(), 1e-9).log_Cn;
  EXPECT_NEAR(m.log_total(), cn, 1e-6);
  EXPECT_GT(m.log_ball, cn - 0.05);
  for (bool c : m.converged) EXPECT_TRUE(c);
}
