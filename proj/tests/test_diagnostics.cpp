#include "gevbayes/diagnostics.hpp"
#include "gevbayes/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace gevbayes;

TEST(Sllm, ScoreIdentityIndexIsExact) {
  const SllmResult r = sllm_check({1, 0, 0.5}, 2000, {0, 1, 0}, 5, 1);
  EXPECT_EQ(r.reps_used, 5);
  EXPECT_DOUBLE_EQ(r.limit, 1.0);
  EXPECT_LT(r.mean_dev, 1e-6);
}

TEST(Sllm, RejectsNonintegrableIndex) {
  EXPECT_THROW(sllm_check({1, 0, -0.6}, 100, {2, 0, 0}, 1, 1), std::invalid_argument);
}

TEST(Boxes, WholeSpaceHasZeroDeviation) {
  Philox4x32 rng(2);
  std::vector<Vec3> z;
  for (int i = 0; i < 1000; ++i) z.emplace_back(rng.normal(), rng.normal(), rng.normal());
  const BvmReport r = box_deviations(z, {{Vec3::Constant(-kInf), Vec3::Constant(kInf)}});
  EXPECT_EQ(r.max_deviation, 0.0);
  EXPECT_EQ(axis_boxes().size(), 27u);
  double total = 0.0;
  for (const Box& b : axis_boxes()) total += gaussian_box_prob(b.a, b.b);
  EXPECT_NEAR(total, 1.0, 1e-14);
}

TEST(Boxes, IidNormalDrawsAreClose) {
  Philox4x32 rng(3);
  std::vector<Vec3> z;
  for (int i = 0; i < 100000; ++i) z.emplace_back(rng.normal(), rng.normal(), rng.normal());
  const BvmReport r = box_deviations(z, axis_boxes());
  EXPECT_LT(r.max_deviation, 0.01);
  EXPECT_LT(r.ks.maxCoeff(), 0.01);
}

TEST(C2, SmallBallIsNearIdentity) {
  const Sample s = gev_sample({1, 0, 0.3}, 5000, 4);
  const MleFit fit = fit_gev(s);
  ASSERT_TRUE(fit.converged);
  const C2Result a = c2_check(fit, s, 0.001, 50);
  const C2Result b = c2_check(fit, s, 0.05, 50);
  EXPECT_EQ(a.probes_used, 50);
  EXPECT_LT(a.max_deviation, 0.05);
  EXPECT_LT(a.max_deviation, b.max_deviation);
}

TEST(C1, ShrinksWithN) {
  double prev = kInf;
  for (std::size_t n : {100u, 1000u, 10000u}) {
    const Sample s = gev_sample({1, 0, 0.5}, n, 5);
    const MleFit fit = fit_gev(s);
    ASSERT_TRUE(fit.converged);
    const double c1 = c1_statistic(fit);
    EXPECT_LT(c1, prev);
    prev = c1;
  }
}

TEST(Helpers, MedianAndMonotone) {
  EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(median({4, 1, kNaN, 2, 3}), 2.5);
  EXPECT_TRUE(std::isnan(median({})));
  EXPECT_TRUE(strictly_decreasing({3, 2, 1}));
  EXPECT_FALSE(strictly_decreasing({3, 3, 1}));
}

namespace {
StudyConfig small_config(unsigned jobs) {
  StudyConfig c;
  c.theta0 = {1, 0, 0.5};
  c.ns = {60, 30};
  c.seeds = {1, 2};
  c.regions = true;
  c.jobs = jobs;
  return c;
}
}  // namespace

TEST(Study, RecordsOrderedAndIndependentOfJobs) {
  const StudyReport a = cn_bn_study(small_config(1), flat_prior());
  const StudyReport b = cn_bn_study(small_config(2), flat_prior());
  ASSERT_EQ(a.records.size(), 4u);
  EXPECT_EQ(a.records[0].n, 30u);
  EXPECT_EQ(a.records[3].n, 60u);
  for (const auto& r : a.records) EXPECT_TRUE(r.ok) << r.error;
  StudyConfig cb = b.config;
  cb.jobs = 1;
  StudyReport b1 = b;
  b1.config = cb;
  EXPECT_EQ(study_jsonl(a), study_jsonl(b1));
}

TEST(Study, JsonRoundTripIsBitExact) {
  const StudyReport a = cn_bn_study(small_config(1), flat_prior());
  const std::string text = study_jsonl(a);
  std::istringstream in(text);
  const StudyReport b = read_study_jsonl(in);
  EXPECT_EQ(study_jsonl(b), text);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].log_Cn, b.records[i].log_Cn);
    EXPECT_EQ(a.records[i].theta_hat, b.records[i].theta_hat);
  }
}

TEST(Study, FailedCellsAreTagged) {
  StudyConfig c = small_config(1);
  c.ns = {30};
  c.seeds = {1};
  const PriorSpec broken = custom_prior("nan", [](double) { return kNaN; }, 0.0);
  const StudyReport r = cn_bn_study(c, broken);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_FALSE(r.records[0].ok);
  EXPECT_FALSE(r.records[0].error.empty());
  EXPECT_EQ(r.summary.at(0).failed, 1);
}

TEST(Study, ReaderRejectsBadInput) {
  std::istringstream a("{\"type\":\"record\"}\n");
  EXPECT_THROW(read_study_jsonl(a), std::exception);
  std::istringstream b("not json\n");
  EXPECT_THROW(read_study_jsonl(b), ParseError);
}
