#include "gevbayes/diagnostics.hpp"
#include "gevbayes/mcmc.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gevbayes;

TEST(Rwm, GaussianTarget) {
  Mat3 cov;
  cov << 1.0, 0.5, 0.0, 0.5, 2.0, 0.3, 0.0, 0.3, 0.5;
  const Mat3 prec = cov.inverse();
  auto lt = [&](const Vec3& x) { return -0.5 * x.dot(prec * x); };
  McmcOptions o;
  o.n_iter = 210000;
  o.burn_in = 10000;
  o.seed = 3;
  const RwmResult r = adaptive_rwm(lt, Vec3(3, -3, 1), Mat3::Identity(), o);
  EXPECT_EQ(r.draws.size(), 200000u);
  EXPECT_GT(r.acceptance_rate, 0.1);
  EXPECT_LT(r.acceptance_rate, 0.5);
  const Eigen::LLT<Mat3> llt(cov);
  const Mat3 Linv = Mat3(llt.matrixL()).inverse();
  for (int c = 0; c < 3; ++c) {
    std::vector<double> z;
    for (const Vec3& x : r.draws) z.push_back((Linv * x)[c]);
    EXPECT_LT(ks_normal(z), 0.02) << "coord " << c;
  }
  const auto [m, v] = sample_moments(r.draws);
  EXPECT_LT((v - cov).norm(), 0.1);
}

TEST(Rwm, DeterministicPerSeed) {
  const Sample s = gev_sample({1, 0, 0.3}, 200, 2);
  const Chain a = sample_posterior(s, flat_prior(), 3000, 1000, 7);
  const Chain b = sample_posterior(s, flat_prior(), 3000, 1000, 7);
  const Chain c = sample_posterior(s, flat_prior(), 3000, 1000, 8);
  ASSERT_EQ(a.draws.size(), 2000u);
  EXPECT_EQ(a.draws, b.draws);
  EXPECT_EQ(a.log_posts, b.log_posts);
  EXPECT_NE(a.draws, c.draws);
}

TEST(Rwm, RejectsBadOptions) {
  const Sample s = gev_sample({1, 0, 0.3}, 50, 2);
  EXPECT_THROW(sample_posterior(s, flat_prior(), 100, 100, 1), std::invalid_argument);
}

TEST(Posterior, ConcentratesNearMle) {
  const Sample s = gev_sample({1, 0, 0.3}, 1000, 4);
  const MleFit fit = fit_gev(s);
  ASSERT_TRUE(fit.converged);
  McmcOptions o;
  o.n_iter = 40000;
  o.burn_in = 5000;
  const Chain c = sample_posterior(s, flat_prior(), o, &fit);
  EXPECT_GT(c.acceptance_rate, 0.1);
  EXPECT_LT(c.acceptance_rate, 0.5);
  const auto [m, v] = sample_moments(chain_vectors(c));
  for (int j = 0; j < 3; ++j) EXPECT_LT(std::abs(m[j] - fit.theta_hat.vec()[j]), 3 * std::sqrt(v(j, j)));
  for (std::size_t i = 0; i < c.draws.size(); i += 97) {
    EXPECT_TRUE(omega_contains(c.draws[i], s));
    EXPECT_NEAR(c.log_posts[i], log_posterior_u({std::log(c.draws[i].tau), c.draws[i].mu, c.draws[i].xi}, s,
                                                flat_prior()),
                1e-9 * std::abs(c.log_posts[i]));
  }
}

TEST(Posterior, SelfStandardization) {
  const Sample s = gev_sample({1, 0, 0.2}, 500, 5);
  McmcOptions o;
  o.n_iter = 30000;
  o.burn_in = 5000;
  const Chain c = sample_posterior(s, flat_prior(), o);
  const auto [m, v] = sample_moments(chain_vectors(c));
  const LaplaceFit lf = laplace_from_moments(m, v);
  const auto [zm, zv] = sample_moments(standardize_draws(c, lf));
  EXPECT_LT(zm.norm(), 1e-10);
  EXPECT_LT((zv - Mat3::Identity()).norm(), 1e-8);
}

TEST(Ess, IidAndCorrelated) {
  Philox4x32 rng(1);
  std::vector<double> iid, ar;
  double x = 0.0;
  for (int i = 0; i < 20000; ++i) {
    iid.push_back(rng.normal());
    x = 0.9 * x + std::sqrt(1 - 0.81) * rng.normal();
    ar.push_back(x);
  }
  EXPECT_NEAR(effective_sample_size(iid) / 20000, 1.0, 0.15);
  // AR(1) with rho = 0.9: n (1 - rho)/(1 + rho)
  EXPECT_NEAR(effective_sample_size(ar) / 20000, 0.1 / 1.9, 0.015);
}
