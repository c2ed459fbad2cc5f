#pragma once

#include "estimation.hpp"
#include "evidence.hpp"
#include "gev.hpp"
#include "likelihood.hpp"
#include "mcmc.hpp"
#include "posterior_normal.hpp"
#include "priors.hpp"
#include "rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace gevbayes {

/// Empirical acceptance thresholds. The limit theory gives no finite-n
/// rates, so these are calibration choices and are echoed into every report.
struct Thresholds {
  double box_deviation = 0.03;
  double c2_deviation = 0.2;
  double lower_bound_slack = 1e-4;
  double rate_deviation = 0.05;
  double shell_fraction = 0.01;
};

/// Runs f(i) for i in [0, count) on up to `jobs` threads. Results must be
/// written to per-index slots so the output does not depend on scheduling.
template <class F>
void parallel_for(std::size_t count, unsigned jobs, F&& f) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(count)));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) f(i);
    });
  for (auto& th : pool) th.join();
}

inline double median(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Normal limit of the posterior

struct Box {
  Vec3 a, b;
};

/// The 27 boxes formed by (-inf, -1], [-1, 1], [1, inf) on each axis.
inline std::vector<Box> axis_boxes(double cut = 1.0) {
  const double e[4] = {-kInf, -cut, cut, kInf};
  std::vector<Box> out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) out.push_back({Vec3(e[i], e[j], e[k]), Vec3(e[i + 1], e[j + 1], e[k + 1])});
  return out;
}

struct BoxDeviation {
  Box box;
  double empirical = 0.0;
  double expected = 0.0;
  double deviation = 0.0;
  double mc_se = 0.0;  // binomial error inflated by the integrated autocorrelation
};

struct BvmReport {
  std::vector<BoxDeviation> boxes;
  double max_deviation = 0.0;
  Vec3 ks = Vec3::Zero();  // per-coordinate Kolmogorov-Smirnov distance of z to N(0, 1)
  Vec3 z_mean = Vec3::Zero();
  Mat3 z_cov = Mat3::Identity();
  double min_ess = 0.0;
  double acceptance_rate = 0.0;
  std::size_t n_draws = 0;
};

inline double ks_normal(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const double m = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = norm_cdf(x[i]);
    d = std::max({d, std::abs(f - static_cast<double>(i) / m), std::abs(static_cast<double>(i + 1) / m - f)});
  }
  return d;
}

/// Box frequencies of standardized draws against the standard normal.
inline BvmReport box_deviations(const std::vector<Vec3>& z, const std::vector<Box>& boxes) {
  require(z.size() >= 4, "bvm_check: need at least 4 draws");
  BvmReport r;
  r.n_draws = z.size();
  double ess = kInf;
  for (int c = 0; c < 3; ++c) ess = std::min(ess, effective_sample_size(z, c));
  r.min_ess = ess;
  const double m = static_cast<double>(z.size());
  for (const Box& b : boxes) {
    std::size_t hit = 0;
    for (const Vec3& v : z)
      if ((v.array() >= b.a.array()).all() && (v.array() <= b.b.array()).all()) ++hit;
    BoxDeviation d;
    d.box = b;
    d.empirical = static_cast<double>(hit) / m;
    d.expected = gaussian_box_prob(b.a, b.b);
    d.deviation = std::abs(d.empirical - d.expected);
    d.mc_se = std::sqrt(d.expected * (1.0 - d.expected) / std::max(ess, 1.0));
    r.max_deviation = std::max(r.max_deviation, d.deviation);
    r.boxes.push_back(d);
  }
  for (int c = 0; c < 3; ++c) {
    std::vector<double> col;
    col.reserve(z.size());
    for (const Vec3& v : z) col.push_back(v[c]);
    r.ks[c] = ks_normal(std::move(col));
  }
  std::tie(r.z_mean, r.z_cov) = sample_moments(z);
  return r;
}

/// Runs the sampler and compares standardized draws with the normal limit.
inline BvmReport bvm_check(const Sample& s, const PriorSpec& pr, const McmcOptions& mc,
                           const std::vector<Box>& boxes = axis_boxes()) {
  const MleFit fit = fit_gev(s);
  if (!fit.converged) throw NumericalError("bvm_check: fit did not converge (" + fit.status + ")");
  const LaplaceFit lf = laplace_fit(fit, pr, s);
  const Chain c = sample_posterior(s, pr, mc, &fit);
  BvmReport r = box_deviations(standardize_draws(c, lf), boxes);
  r.acceptance_rate = c.acceptance_rate;
  return r;
}

// ---------------------------------------------------------------------------
// Pseudo-SLLN limits of the structured sums

struct SllmResult {
  double limit = kNaN;       // (-xi0)^b Gamma^{(b)}(k xi0 + a + 1)
  double mean_value = kNaN;  // mean over reps of n^{-1} sum_stat(theta_hat)
  double se = kNaN;          // standard error of that mean
  double mean_dev = kNaN;    // mean over reps of |n^{-1} sum_stat - limit|
  int reps_used = 0;
  int reps_failed = 0;
};

inline SllmResult sllm_check(const GevParams& theta0, std::size_t n, SumStatIndex idx, int reps, std::uint64_t seed) {
  require(reps >= 1, "sllm_check: reps must be positive");
  require(idx.k * theta0.xi + idx.a + 1.0 > 0.0, "sllm_check: requires k*xi0 + a + 1 > 0");
  SllmResult r;
  r.limit = sum_stat_limit(theta0.xi, idx.k, idx.a, idx.b);
  std::vector<double> vals;
  for (int rep = 0; rep < reps; ++rep) {
    const Sample s = gev_sample(theta0, n, seed, static_cast<std::uint64_t>(rep));
    const MleFit fit = fit_gev(s);
    if (!fit.converged) {
      ++r.reps_failed;
      continue;
    }
    vals.push_back(sum_stat(fit.theta_hat, s, idx) / static_cast<double>(n));
  }
  r.reps_used = static_cast<int>(vals.size());
  if (vals.empty()) return r;
  double m = 0.0, dev = 0.0;
  for (double v : vals) {
    m += v;
    dev += std::abs(v - r.limit);
  }
  m /= vals.size();
  double ss = 0.0;
  for (double v : vals) ss += (v - m) * (v - m);
  r.mean_value = m;
  r.mean_dev = dev / vals.size();
  r.se = vals.size() > 1 ? std::sqrt(ss / (vals.size() - 1) / vals.size()) : kNaN;
  return r;
}

// ---------------------------------------------------------------------------
// C1 and C2

/// Largest eigenvalue of the inverse observed information.
inline double c1_statistic(const MleFit& fit) { return observed_info(fit).c1_statistic; }

struct C2Result {
  double max_deviation = 0.0;
  int probes_used = 0;
  int probes_skipped = 0;  // outside Omega_n or Theta
};

/// max over random theta in the ball B_radius(theta_hat) of the spectral
/// distance of L''(theta) L''(theta_hat)^{-1} from the identity.
inline C2Result c2_check(const MleFit& fit, const Sample& s, double radius, int probes, std::uint64_t seed = 1) {
  require(fit.converged, "c2_check: fit did not converge");
  require(radius > 0.0 && probes >= 1, "c2_check: need radius > 0 and probes >= 1");
  Eigen::LLT<Mat3> llt(fit.obs_info);
  if (llt.info() != Eigen::Success) throw NumericalError("c2_check: observed information is not positive definite");
  const Mat3 Linv = Mat3(llt.matrixL()).inverse();
  Philox4x32 rng(seed, 0xC2);
  C2Result r;
  for (int i = 0; i < probes; ++i) {
    // uniform in the ball
    Vec3 d(rng.normal(), rng.normal(), rng.normal());
    d *= radius * std::cbrt(rng.uniform()) / d.norm();
    const GevParams p = GevParams::from_vec(fit.theta_hat.vec() + d);
    if (!p.in_theta() || !omega_contains(p, s)) {
      ++r.probes_skipped;
      continue;
    }
    // similar to -L''(theta) (-L''(theta_hat))^{-1}, in symmetric form
    const Mat3 a = Linv * (-hessian(p, s)) * Linv.transpose();
    Eigen::SelfAdjointEigenSolver<Mat3> es(a, Eigen::EigenvaluesOnly);
    const double dev = (es.eigenvalues().array() - 1.0).abs().maxCoeff();
    r.max_deviation = std::max(r.max_deviation, dev);
    ++r.probes_used;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Evidence against its lower bound

struct StudyConfig {
  GevParams theta0{1.0, 0.0, 0.5};
  std::string prior = "flat";
  std::vector<std::size_t> ns{100, 300, 1000, 3000};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  double tol = 1e-6;
  bool regions = false;
  double region_r = 0.2;
  unsigned jobs = 1;
  Thresholds thresholds;
};

struct StudyRecord {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;  // empty when ok
  GevParams theta_hat;
  double log_Bn = kNaN;
  double log_Cn = kNaN;
  double log_Cn_err = kNaN;
  double log_ratio = kNaN;  // log_Cn - log_Bn
  double rate = kNaN;       // log_Bn / n
  double rate_ref = kNaN;   // log of the almost-sure limit of B_n^{1/n}
  double c1 = kNaN;
  bool has_regions = false;
  std::array<double, 6> region_log_fraction{kNaN, kNaN, kNaN, kNaN, kNaN, kNaN};  // regions 1..5, ball
};

struct StudySummaryRow {
  std::size_t n = 0;
  int cells = 0;
  int failed = 0;
  double median_log_ratio = kNaN;
  double median_rate_dev = kNaN;
  double median_c1 = kNaN;
  double median_shell_fraction = kNaN;
  std::array<double, 5> median_region_log_fraction{kNaN, kNaN, kNaN, kNaN, kNaN};
};

struct StudyReport {
  StudyConfig config;
  std::vector<StudyRecord> records;
  std::vector<StudySummaryRow> summary;
  bool ratio_decreasing = false;
  bool lower_bound_holds = false;
  bool regions_decreasing = false;
};

/// Sample for study cell (n, seed); the stream keeps different n independent.
inline Sample study_sample(const GevParams& theta0, std::size_t n, std::uint64_t seed) {
  return gev_sample(theta0, n, seed, static_cast<std::uint64_t>(n));
}

inline StudyRecord study_cell(const StudyConfig& cfg, const PriorSpec& pr, std::size_t n, std::uint64_t seed) {
  StudyRecord rec;
  rec.n = n;
  rec.seed = seed;
  try {
    const Sample s = study_sample(cfg.theta0, n, seed);
    const MleFit fit = fit_gev(s);
    rec.theta_hat = fit.theta_hat;
    if (!fit.converged) throw NumericalError("fit: " + fit.status);
    rec.c1 = c1_statistic(fit);
    rec.log_Bn = log_Bn(fit, pr, s);
    rec.rate = rec.log_Bn / static_cast<double>(n);
    if (cfg.theta0.xi > -0.5) rec.rate_ref = std::log(bn_rate_limit(cfg.theta0));
    EvidenceOptions eo;
    eo.tol = cfg.tol;
    const EvidenceResult ev = log_Cn(s, pr, eo, &fit);
    rec.log_Cn = ev.log_Cn;
    rec.log_Cn_err = ev.abs_err_log;
    rec.log_ratio = rec.log_Cn - rec.log_Bn;
    if (cfg.regions && pr.scale_invariant() && fit.theta_hat.xi > cfg.region_r) {
      const GevParams& th0 = cfg.theta0.xi > 0.0 ? cfg.theta0 : fit.theta_hat;
      const RegionRadii rr = region_radii(th0, cfg.region_r);
      const RegionMasses m = region_masses(s, pr, rr, fit, cfg.tol, &th0);
      for (int k = 0; k < 5; ++k) rec.region_log_fraction[k] = m.log_mass[k] - ev.log_Cn;
      rec.region_log_fraction[5] = m.log_ball - ev.log_Cn;
      rec.has_regions = true;
    }
    rec.ok = ev.converged;
    if (!ev.converged) rec.error = "evidence quadrature did not converge";
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

inline void summarize(StudyReport& rep) {
  rep.summary.clear();
  std::map<std::size_t, std::vector<const StudyRecord*>> by_n;
  for (const auto& r : rep.records) by_n[r.n].push_back(&r);
  bool lb = !rep.records.empty();
  for (const auto& [n, recs] : by_n) {
    StudySummaryRow row;
    row.n = n;
    std::vector<double> ratio, rate, c1, shell;
    std::array<std::vector<double>, 5> reg;
    for (const StudyRecord* r : recs) {
      ++row.cells;
      if (!r->ok) {
        ++row.failed;
        continue;
      }
      ratio.push_back(r->log_ratio);
      rate.push_back(std::abs(r->rate - r->rate_ref));
      c1.push_back(r->c1);
      if (r->log_ratio < -rep.config.thresholds.lower_bound_slack) lb = false;
      if (r->has_regions) {
        shell.push_back(-std::expm1(r->region_log_fraction[5]));
        for (int k = 0; k < 5; ++k) reg[k].push_back(r->region_log_fraction[k]);
      }
    }
    row.median_log_ratio = median(ratio);
    row.median_rate_dev = median(rate);
    row.median_c1 = median(c1);
    row.median_shell_fraction = median(shell);
    for (int k = 0; k < 5; ++k) row.median_region_log_fraction[k] = median(reg[k]);
    rep.summary.push_back(row);
  }
  std::vector<double> med;
  for (const auto& row : rep.summary) med.push_back(row.median_log_ratio);
  rep.ratio_decreasing = med.size() >= 2 && strictly_decreasing(med);
  rep.lower_bound_holds = lb;
  bool rd = rep.config.regions && rep.summary.size() >= 2;
  for (int k = 0; k < 5 && rd; ++k) {
    std::vector<double> v;
    for (const auto& row : rep.summary) v.push_back(row.median_region_log_fraction[k]);
    rd = strictly_decreasing(v);
  }
  rep.regions_decreasing = rd;
}

/// Sweep over (n, seed) cells. Failed cells carry an error tag instead of
/// stopping the sweep; records are ordered by (n, seed) whatever the job count.
inline StudyReport cn_bn_study(const StudyConfig& cfg, const PriorSpec& pr) {
  require(!cfg.ns.empty() && !cfg.seeds.empty(), "cn_bn_study: need at least one n and one seed");
  for (std::size_t n : cfg.ns) require(n >= 3, "cn_bn_study: n must be at least 3");
  StudyReport rep;
  rep.config = cfg;
  std::vector<std::size_t> ns = cfg.ns;
  std::sort(ns.begin(), ns.end());
  std::vector<std::pair<std::size_t, std::uint64_t>> cells;
  for (std::size_t n : ns)
    for (std::uint64_t sd : cfg.seeds) cells.emplace_back(n, sd);
  rep.records.resize(cells.size());
  parallel_for(cells.size(), cfg.jobs,
               [&](std::size_t i) { rep.records[i] = study_cell(cfg, pr, cells[i].first, cells[i].second); });
  summarize(rep);
  return rep;
}

}  // namespace gevbayes
