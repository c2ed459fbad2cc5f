#include "gevbayes/estimation.hpp"
#include "gevbayes/likelihood.hpp"
#include "gevbayes/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gevbayes;

namespace {

// central differences of the log-likelihood, relative to the larger of 1 and the value
double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

struct Case {
  GevParams p;
  Sample s;
};

Case random_case(Philox4x32& rng, std::uint64_t seed) {
  const GevParams truth{std::exp(0.5 * rng.normal()), rng.normal(), -0.3 + 1.6 * rng.uniform()};
  Sample s = gev_sample(truth, 50, seed);
  // a point near the truth that stays inside the support
  for (;;) {
    GevParams p{truth.tau * std::exp(0.05 * rng.normal()), truth.mu + 0.05 * rng.normal(),
                truth.xi + 0.05 * rng.normal()};
    if (p.xi > -0.45 && omega_contains(p, s)) return {p, s};
  }
}

}  // namespace

TEST(Score, MatchesFiniteDifferences) {
  Philox4x32 rng(21);
  for (int c = 0; c < 30; ++c) {
    const Case k = random_case(rng, 500 + c);
    const Vec3 g = score(k.p, k.s);
    for (int j = 0; j < 3; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(k.p.vec()[j]));
      Vec3 up = k.p.vec(), dn = k.p.vec();
      up[j] += h;
      dn[j] -= h;
      const double fd = (log_likelihood(GevParams::from_vec(up), k.s) - log_likelihood(GevParams::from_vec(dn), k.s)) /
                        (2 * h);
      EXPECT_LT(rel(g[j], fd), 1e-5) << "case " << c << " coord " << j;
    }
  }
}

TEST(Hessian, MatchesFiniteDifferencesOfScore) {
  Philox4x32 rng(22);
  for (int c = 0; c < 30; ++c) {
    const Case k = random_case(rng, 700 + c);
    const Mat3 H = hessian(k.p, k.s);
    EXPECT_LT((H - H.transpose()).norm(), 1e-12 * std::max(1.0, H.norm()));
    for (int j = 0; j < 3; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(k.p.vec()[j]));
      Vec3 up = k.p.vec(), dn = k.p.vec();
      up[j] += h;
      dn[j] -= h;
      const Vec3 fd = (score(GevParams::from_vec(up), k.s) - score(GevParams::from_vec(dn), k.s)) / (2 * h);
      for (int i = 0; i < 3; ++i) EXPECT_LT(rel(H(i, j), fd[i]), 1e-4) << "case " << c;
    }
  }
}

TEST(LogLikelihood, OutsideSupportIsMinusInfinity) {
  const Sample s(std::vector<double>{0.0, 1.0, 2.0});
  EXPECT_EQ(log_likelihood(from_beta({1, 0.5, 1.0}), s), -kInf);
  EXPECT_GT(log_likelihood(from_beta({1, -0.5, 1.0}), s), -kInf);
}

TEST(LogLikelihood, ContinuousThroughGumbel) {
  const Sample s = gev_sample({1, 0, 0.0}, 200, 4);
  const double g = log_likelihood({1.1, 0.2, 0.0}, s);
  EXPECT_NEAR(log_likelihood({1.1, 0.2, 1e-7}, s), g, 1e-4);
  EXPECT_NEAR(log_likelihood({1.1, 0.2, -1e-7}, s), g, 1e-4);
}

TEST(SumStat, RejectsOutsideSupportAndBadIndex) {
  const Sample s(std::vector<double>{0.0, 1.0, 2.0});
  EXPECT_THROW(sum_stat(from_beta({1, 0.5, 1.0}), s, {0, 0, 0}), SupportError);
  EXPECT_THROW(SumStatIndex(3, 0, 0), std::invalid_argument);
  EXPECT_THROW(SumStatIndex(0, 2, 0), std::invalid_argument);
}

TEST(SumStat, NearItsLimitAtLargeN) {
  const GevParams theta0{1, 0, 0.5};
  const std::size_t n = 100000;
  const Sample s = gev_sample(theta0, n, 1);
  const MleFit fit = fit_gev(s);
  ASSERT_TRUE(fit.converged);
  const double v = sum_stat(fit.theta_hat, s, {0, 1, 1}) / n;
  EXPECT_NEAR(sum_stat_limit(0.5, 0, 1, 1), -0.21139, 1e-5);
  EXPECT_NEAR(v, -0.21139, 0.02 * 0.21139);
}

TEST(SumStat, ScoreIdentityAtMle) {
  const Sample s = gev_sample({2, 1, 0.3}, 2000, 8);
  const MleFit fit = fit_gev(s);
  ASSERT_TRUE(fit.converged);
  EXPECT_NEAR(sum_stat(fit.theta_hat, s, {0, 1, 0}) / s.n(), 1.0, 1e-6);
}

TEST(SumStat, LimitValues) {
  EXPECT_NEAR(sum_stat_limit(0.5, 0, 0, 0), 1.0, 1e-14);
  EXPECT_NEAR(sum_stat_limit(0.5, 0, 1, 0), 1.0, 1e-14);
  EXPECT_NEAR(sum_stat_limit(1.0, 1, 0, 0), 1.0, 1e-14);  // Gamma(2)
  EXPECT_NEAR(sum_stat_limit(1.0, 2, 1, 0), 6.0, 1e-12);  // Gamma(4)
  EXPECT_THROW(sum_stat_limit(-0.6, 2, 0, 0), std::invalid_argument);
}

TEST(HessianViaSumStat, AgreesWithDirectHessian) {
  Philox4x32 rng(23);
  for (int c = 0; c < 20; ++c) {
    const Case k = random_case(rng, 900 + c);
    if (std::abs(k.p.xi) < 1e-3) continue;
    const Mat3 a = hessian(k.p, k.s), b = hessian_via_sum_stat(k.p, k.s);
    EXPECT_LT((a - b).norm(), 1e-7 * std::max(1.0, a.norm())) << "case " << c;
  }
}
