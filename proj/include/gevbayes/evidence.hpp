#pragma once

#include "estimation.hpp"
#include "gev.hpp"
#include "likelihood.hpp"
#include "numerics.hpp"
#include "posterior_normal.hpp"
#include "priors.hpp"
#include "quadrature.hpp"
#include "specfun.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace gevbayes {

enum class EvidenceMethod { Reduced2D, Full3D };

inline const char* to_string(EvidenceMethod m) { return m == EvidenceMethod::Reduced2D ? "reduced-2d" : "full-3d"; }

/// Log-masses of the five sub-regions of the parameter space outside the
/// ball, and of the ball itself.
struct RegionMasses {
  std::array<double, 5> log_mass{-kInf, -kInf, -kInf, -kInf, -kInf};
  double log_ball = -kInf;
  std::array<double, 6> log_err{};  // relative errors, ball last
  std::array<bool, 6> converged{true, true, true, true, true, true};

  double log_total() const {
    LogSumExp acc;
    for (double v : log_mass) acc.add(v);
    acc.add(log_ball);
    return acc.value();
  }
  /// Combined relative error of log_total().
  double total_err() const {
    const double t = log_total();
    double e = 0.0;
    for (int k = 0; k < 5; ++k)
      if (log_mass[k] > -kInf) e += log_err[k] * std::exp(log_mass[k] - t);
    if (log_ball > -kInf) e += log_err[5] * std::exp(log_ball - t);
    return e;
  }
};

struct EvidenceResult {
  double log_Cn = kNaN;
  double abs_err_log = kInf;
  EvidenceMethod method = EvidenceMethod::Reduced2D;
  bool converged = false;
  std::optional<RegionMasses> regions;
  // pieces: xi > 0 branch, xi < 0 branch, seam around xi = 0
  double log_pos = -kInf, log_neg = -kInf, log_seam = -kInf;
  double xi_max = kNaN;  // final upper truncation of the xi axis
  long n_eval = 0;
};

struct EvidenceOptions {
  double tol = 1e-6;          // relative tolerance on C_n (absolute in log)
  double seam_delta = 1e-4;   // half-width of the strip around xi = 0
  double xi_max_offset = 10.0;
  int max_doublings = 40;
  bool full3d = false;        // force the 3D route for scale-invariant priors
};

/// The tau-integrated integrand in (x, xi), with x = log D and D the distance
/// of beta from the nearest observation (Y_(1) - beta for xi > 0,
/// beta - Y_(n) for xi < 0).
///
/// With l_i = log(1 + delta_i/D) and delta_i the spacings to that extreme,
///   f = log g + log Gamma(n) + (1 - n) log|xi| - n x - (1/xi + 1) sum l_i
///       - n log sum exp(-l_i/xi) + x,
/// where the trailing x is the Jacobian of beta -> x.
class ReducedIntegrand {
 public:
  ReducedIntegrand(const Sample& s, const PriorSpec& pr) : s_(s), pr_(pr) {
    require(pr.scale_invariant(), "reduced integrand needs a scale-invariant prior");
    n_ = static_cast<double>(s.n());
    lgn_ = std::lgamma(n_);
    dpos_.reserve(s.n());
    dneg_.reserve(s.n());
    for (double y : s) dpos_.push_back(y - s.min());
    for (double y : s) dneg_.push_back(s.max() - y);
  }

  struct Value {
    double f;      // log integrand including the Jacobian of x
    double log_s;  // log sum_i (|xi| d_i)^{-1/xi}
  };

  Value eval(double xi, double x) const {
    if (!(xi > -0.5) || xi == 0.0 || !std::isfinite(x)) return {-kInf, kNaN};
    const std::vector<double>& dl = xi > 0.0 ? dpos_ : dneg_;
    const double D = std::exp(x);
    const double ix = 1.0 / xi;
    CompensatedSum sl;
    double lse;
    if (xi > 0.0) {
      // terms exp(-l_i/xi) <= 1 with equality at the minimum
      CompensatedSum se;
      for (double d : dl) {
        const double l = std::log1p(d / D);
        sl += l;
        se += std::exp(-l * ix);
      }
      lse = std::log(se.value());
    } else {
      const double lmax = std::log1p(dl.front() / D);  // dneg_ is descending
      CompensatedSum se;
      for (double d : dl) {
        const double l = std::log1p(d / D);
        sl += l;
        se += std::exp((lmax - l) * ix);
      }
      lse = -lmax * ix + std::log(se.value());
    }
    const double lax = std::log(std::abs(xi));
    const double f = pr_.log_g(xi) + lgn_ + (1.0 - n_) * lax - n_ * x - (ix + 1.0) * sl.value() - n_ * lse + x;
    const double log_s = -ix * lax - x * ix + lse;
    return {std::isnan(f) ? -kInf : f, log_s};
  }

  double n() const { return n_; }
  const Sample& sample() const { return s_; }
  const PriorSpec& prior() const { return pr_; }

 private:
  const Sample& s_;
  const PriorSpec& pr_;
  double n_ = 0.0, lgn_ = 0.0;
  std::vector<double> dpos_, dneg_;
};

/// log of the tau-integrated integrand at (beta, xi), in the beta measure.
inline double reduced_integrand_log(double beta, double xi, const Sample& s, const PriorSpec& pr) {
  require(pr.scale_invariant(), "reduced_integrand_log: proper priors have no closed tau-reduction");
  require(xi != 0.0, "reduced_integrand_log: xi must be nonzero");
  const double D = xi > 0.0 ? s.min() - beta : beta - s.max();
  if (!(D > 0.0)) throw SupportError("reduced_integrand_log: (beta, xi) outside the support");
  ReducedIntegrand ri(s, pr);
  const double x = std::log(D);
  return ri.eval(xi, x).f - x;
}

namespace detail {

/// Location/width guesses for the inner integrals, from the normal approximation.
class Hints {
 public:
  Hints(const Sample& s, const MleFit* fit) : s_(s) {
    spread_ = s.max() - s.min();
    if (fit != nullptr && fit->converged) {
      mean_ = fit->theta_hat.vec();
      Eigen::LLT<Mat3> llt(fit->obs_info);
      if (llt.info() == Eigen::Success) {
        cov_ = llt.solve(Mat3::Identity());
        ok_ = true;
      }
    }
    if (!ok_) {
      GevParams p;
      try {
        p = pwm_init(s);
      } catch (const std::exception&) {
        p = {std::max(spread_, 1e-3), s.min(), 0.1};
      }
      mean_ = p.vec();
      const double sc = std::max(p.tau, 1e-8);
      cov_ = Vec3(sc * sc, sc * sc, 0.25).asDiagonal();
      cov_ /= std::max(1.0, static_cast<double>(s.n()) / 10.0);
    }
  }

  double xi_hat() const { return mean_[2]; }
  double xi_sd() const { return std::sqrt(cov_(2, 2)); }
  const Vec3& mean() const { return mean_; }
  const Mat3& cov() const { return cov_; }

  /// (center, scale) for x = log D at a given xi.
  std::pair<double, double> x_hint(double xi) const {
    const double dx = xi - mean_[2];
    const Eigen::Vector2d m = mean_.head<2>() + cov_.block<2, 1>(0, 2) * (dx / cov_(2, 2));
    const Eigen::Matrix2d c =
        cov_.topLeftCorner<2, 2>() - cov_.block<2, 1>(0, 2) * cov_.block<1, 2>(2, 0) / cov_(2, 2);
    const Eigen::Vector2d g(-1.0 / xi, 1.0);
    const double beta = m[1] - m[0] / xi;
    const double sd_beta = std::sqrt(std::max(g.dot(c * g), 0.0));
    const double D = xi > 0.0 ? s_.min() - beta : beta - s_.max();
    if (D > 0.0 && std::isfinite(D)) return {std::log(D), std::clamp(sd_beta / D, 1e-4, 3.0)};
    return {std::log(std::max(spread_, 1e-300)), 1.0};
  }

  /// (center, scale) for v = log tau at a given xi.
  std::pair<double, double> v_hint(double xi) const {
    const double dx = xi - mean_[2];
    const double tau = mean_[0] + cov_(0, 2) / cov_(2, 2) * dx;
    const double var = cov_(0, 0) - cov_(0, 2) * cov_(0, 2) / cov_(2, 2);
    const double t = tau > 0.0 ? tau : mean_[0];
    return {std::log(t), std::clamp(std::sqrt(std::max(var, 0.0)) / t, 1e-4, 2.0)};
  }

  /// (center, scale) for mu at given (tau, xi).
  std::pair<double, double> mu_hint(double tau, double xi) const {
    const Eigen::Vector2d d(tau - mean_[0], xi - mean_[2]);
    Eigen::Matrix2d c22;
    c22 << cov_(0, 0), cov_(0, 2), cov_(2, 0), cov_(2, 2);
    const Eigen::Vector2d c12(cov_(1, 0), cov_(1, 2));
    const Eigen::Vector2d k = c22.ldlt().solve(c12);
    const double m = mean_[1] + k.dot(d);
    const double var = cov_(1, 1) - c12.dot(k);
    return {m, std::max(std::sqrt(std::max(var, 0.0)), 1e-6 * std::max(1.0, std::abs(m)))};
  }

 private:
  const Sample& s_;
  Vec3 mean_ = Vec3::Zero();
  Mat3 cov_ = Mat3::Identity();
  double spread_ = 1.0;
  bool ok_ = false;
};

/// Log of the double integral over (v = log tau, mu) at fixed xi of
/// likelihood x prior x tau, with v restricted to (v_lo, v_hi).
inline LogValue slice_3d(const Sample& s, const PriorSpec& pr, const Hints& hints, double xi, double rel_tol,
                         double v_lo = -kInf, double v_hi = kInf, long* n_eval = nullptr) {
  auto inner = [&](double v) -> LogValue {
    const double tau = std::exp(v);
    if (!(tau > 0.0) || !std::isfinite(tau)) return {};
    auto [mc, ms] = hints.mu_hint(tau, xi);
    PeakOptions o;
    if (std::abs(xi) >= kGumbelXi) {
      if (xi > 0.0)
        o.hi = s.min() + tau / xi;
      else
        o.lo = s.max() + tau / xi;
    }
    o.center = mc;
    o.scale = ms;
    o.rel_tol = rel_tol;
    auto f = [&](double mu) {
      const GevParams p{tau, mu, xi};
      const double ll = log_likelihood(p, s);
      if (!(ll > -kInf)) return -kInf;
      return ll + log_prior(pr, p) + v;
    };
    const LogIntegral r = integrate_log_peaked(f, o);
    if (n_eval) *n_eval += r.n_eval;
    return {r.log_value, r.log_err};
  };
  auto [vc, vs] = hints.v_hint(xi);
  PeakOptions o;
  o.lo = v_lo;
  o.hi = v_hi;
  o.center = vc;
  o.scale = vs;
  o.rel_tol = rel_tol;
  const LogIntegral r = integrate_log_peaked(inner, o);
  return {r.log_value, r.log_err};
}

struct PieceResult {
  double log_value = -kInf;
  double rel_err = 0.0;
  bool converged = true;
};

inline void accumulate(EvidenceResult& r, const std::vector<PieceResult>& pieces) {
  LogSumExp acc;
  for (const auto& p : pieces) acc.add(p.log_value);
  r.log_Cn = acc.value();
  double e = 0.0;
  bool conv = true;
  for (const auto& p : pieces) {
    conv = conv && p.converged;
    if (p.log_value > -kInf) e += p.rel_err * std::exp(p.log_value - r.log_Cn);
  }
  r.abs_err_log = e;
  r.converged = conv && std::isfinite(r.log_Cn);
}

// Gauss-Kronrod (3,7) rule on [-1, 1]
inline constexpr std::array<double, 4> kK7Nodes = {0.960491268708020283423507092629080,
                                                   0.774596669241483377035853079956480,
                                                   0.434243749346802558002071502844628, 0.0};
inline constexpr std::array<double, 4> kK7Weights = {0.104656226026467265193823857192073,
                                                     0.268488089868333440728569280666710,
                                                     0.401397414775962222905051818618432,
                                                     0.450916538658474142345110087045571};
inline constexpr std::array<double, 2> kG3Weights = {5.0 / 9.0, 8.0 / 9.0};

/// Integral of exp(m(xi)) over a short interval by the (3,7) Kronrod rule,
/// m given on the nodes by `slice`.
template <class Slice>
PieceResult kronrod7_log(Slice&& slice, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  std::array<double, 7> xs, ms;
  std::array<double, 7> rel;
  int k = 0;
  for (int j = 0; j < 3; ++j) {
    xs[k++] = c - h * kK7Nodes[j];
    xs[k++] = c + h * kK7Nodes[j];
  }
  xs[6] = c;
  double mx = -kInf;
  for (int i = 0; i < 7; ++i) {
    const LogValue lv = slice(xs[i]);
    ms[i] = lv.log_value;
    rel[i] = lv.rel_err;
    mx = std::max(mx, ms[i]);
  }
  if (mx == -kInf) return {};
  auto e = [&](int i) { return std::exp(ms[i] - mx); };
  double K = kK7Weights[3] * e(6), G = kG3Weights[1] * e(6), R = kK7Weights[3] * e(6) * rel[6];
  for (int j = 0; j < 3; ++j) {
    const double pair = e(2 * j) + e(2 * j + 1);
    K += kK7Weights[j] * pair;
    R += kK7Weights[j] * (e(2 * j) * rel[2 * j] + e(2 * j + 1) * rel[2 * j + 1]);
    if (j == 1) G += kG3Weights[0] * pair;
  }
  PieceResult out;
  out.log_value = mx + std::log(K * h);
  out.rel_err = std::abs(K - G) / K + R / K;
  return out;
}

/// Integrate a log-marginal m(xi, inner_rel_tol) over xi on (lo, hi), with a
/// tail-doubling loop when hi is infinite.
template <class M>
PieceResult xi_branch(M&& m, double lo, double hi, double center, double scale, double tol, double xi_max_start,
                      int max_doublings, double* xi_max_used, const std::vector<double>& probes = {}) {
  PeakOptions o;
  o.lo = lo;
  o.hi = hi;
  o.center = center;
  o.scale = scale;
  o.rel_tol = tol;
  o.probes = probes;
  const LogIntegral main = integrate_log_peaked([&](double xi) { return m(xi, 0.1 * tol); }, o);
  PieceResult out{main.log_value, main.log_err, main.converged};
  if (!std::isfinite(hi) && main.log_value > -kInf) {
    // the walk already stopped where m fell far below its peak; confirm by
    // integrating doubling panels beyond the truncation point
    double X = std::max(xi_max_start, main.hi);
    for (int k = 0; k < max_doublings; ++k) {
      // one Kronrod panel on [X, 2X] at coarse inner accuracy
      const double Xc = X;
      auto lm = [&](double xi) { return m(xi, 1e-4); };
      PieceResult panel = kronrod7_log(lm, Xc, 2.0 * Xc);
      if (panel.log_value > -kInf) {
        const double total = log_add_exp(out.log_value, panel.log_value);
        out.rel_err = out.rel_err * std::exp(out.log_value - total) +
                      std::min(1.0, panel.rel_err + 1e-4) * std::exp(panel.log_value - total);
        out.log_value = total;
      }
      X *= 2.0;
      if (!(panel.log_value - out.log_value > std::log(0.01 * tol))) break;
      if (k + 1 == max_doublings) out.converged = false;
    }
    if (xi_max_used) *xi_max_used = X;
  }
  return out;
}

/// Log-likelihood plus log-prior in endpoint coordinates (v = log tau,
/// x = log D, xi), with w_i = |xi| d_i / tau formed from the spacings so
/// that tiny w_i keep full precision.
class EndpointIntegrand {
 public:
  EndpointIntegrand(const Sample& s, const PriorSpec& pr) : s_(s), pr_(pr) {
    for (double y : s) dpos_.push_back(y - s.min());
    for (double y : s) dneg_.push_back(s.max() - y);
  }

  double eval(double xi, double x, double v) const {
    if (!(xi > -0.5) || xi == 0.0 || !std::isfinite(x) || !std::isfinite(v)) return -kInf;
    const std::vector<double>& dl = xi > 0.0 ? dpos_ : dneg_;
    const double D = std::exp(x), tau = std::exp(v);
    const double beta = xi > 0.0 ? s_.min() - D : s_.max() + D;
    const double lp = log_prior(pr_, GevParams{tau, beta + tau / xi, xi});
    if (!(lp > -kInf)) return -kInf;
    const double base = std::log(std::abs(xi)) + x - v;  // log w_i minus log1p(delta_i/D)
    const double ix = 1.0 / xi;
    CompensatedSum acc;
    for (double d : dl) {
      const double lw = base + std::log1p(d / D);
      acc += -(1.0 + ix) * lw - std::exp(-ix * lw);
    }
    const double n = static_cast<double>(dl.size());
    return acc.value() - n * v + lp + v + x;
  }

 private:
  const Sample& s_;
  const PriorSpec& pr_;
  std::vector<double> dpos_, dneg_;
};

/// Shared assembly of log C_n from the two xi-branches and the strip
/// |xi| < delta.
template <class Marginal, class Strip>
void assemble_evidence(EvidenceResult& res, Marginal&& marginal, Strip&& strip, const Hints& hints,
                       const EvidenceOptions& opt) {
  const double tol = opt.tol, delta = opt.seam_delta;
  const double xh = hints.xi_hat(), xsd = std::max(hints.xi_sd(), 1e-4);
  auto do_pos = [&](double t) {
    return xi_branch(marginal, delta, kInf, std::max(xh, 2.0 * delta), xsd, t, xh + opt.xi_max_offset,
                     opt.max_doublings, &res.xi_max, {2.0 * delta, 0.1, 0.5, 1.0, 3.0});
  };
  auto do_neg = [&](double t) {
    return xi_branch(marginal, -0.5, -delta, std::min(xh, -2.0 * delta), xsd, t, 0.0, 0, nullptr,
                     {-0.4, -0.25, -0.1, -2.0 * delta});
  };
  // The branch holding the mode sets the scale. Pieces far below tol are
  // replaced by a probe-based bound with a 100% error bar; others get the
  // relative accuracy their share of the total calls for.
  auto minor_branch = [&](double main_log, std::initializer_list<double> probes, double width,
                          auto&& full) -> PieceResult {
    double est = -kInf;
    for (double xi : probes) est = std::max(est, marginal(xi, 1e-3).log_value);
    est += std::log(width);
    if (est < main_log + std::log(tol) - 10.0) return {est - std::log(2.0), 1.0, true};
    return full(std::clamp(tol * std::exp(main_log - est), tol, 1e-2));
  };
  PieceResult pos, neg;
  if (xh > 0.0) {
    pos = do_pos(tol);
    neg = minor_branch(pos.log_value, {-2.0 * delta, -0.1, -0.25, -0.45}, 0.5, do_neg);
  } else {
    neg = do_neg(tol);
    pos = minor_branch(neg.log_value, {2.0 * delta, 0.1, 0.5, 2.0}, 10.0, do_pos);
  }
  res.log_pos = pos.log_value;
  res.log_neg = neg.log_value;

  const double main = log_add_exp(pos.log_value, neg.log_value);
  const double est = strip(0.0, 1e-3).log_value + std::log(2.0 * delta);
  PieceResult seam;
  if (est < main + std::log(tol) - 10.0) {
    seam = {est, 1.0, true};  // midpoint value; negligible against the branches
  } else if (est > -kInf) {
    const double need = std::clamp(tol * std::exp(main - est), tol, 1e-2);
    seam = kronrod7_log([&](double xi) { return strip(xi, 0.1 * need); }, -delta, delta);
  }
  res.log_seam = seam.log_value;
  accumulate(res, {pos, neg, seam});
}

}  // namespace detail

/// Brute-force 3D quadrature over (xi, log D, log tau), with the strip
/// |xi| < delta done in (log tau, mu); works for any prior.
inline EvidenceResult log_Cn_full3d(const Sample& s, const PriorSpec& pr, const EvidenceOptions& opt,
                                    const MleFit* fit = nullptr) {
  require(s.n() >= 3, "log_Cn: need at least 3 observations");
  require(opt.tol > 0.0, "log_Cn: tol must be positive");
  std::optional<MleFit> own;
  if (fit == nullptr) {
    own = fit_gev(s);
    fit = &*own;
  }
  detail::Hints hints(s, fit);
  detail::EndpointIntegrand ei(s, pr);
  EvidenceResult res;
  res.method = EvidenceMethod::Full3D;
  auto marginal = [&](double xi, double rt) -> LogValue {
    auto [vc, vs] = hints.v_hint(xi);
    auto middle = [&](double x) -> LogValue {
      PeakOptions o;
      o.center = vc;
      o.scale = vs;
      o.rel_tol = rt;
      const LogIntegral r = integrate_log_peaked([&](double v) { return ei.eval(xi, x, v); }, o);
      res.n_eval += r.n_eval;
      return {r.log_value, r.log_err};
    };
    auto [xc, xs] = hints.x_hint(xi);
    PeakOptions o;
    o.center = xc;
    o.scale = xs;
    o.rel_tol = rt;
    const LogIntegral r = integrate_log_peaked(middle, o);
    return {r.log_value, r.log_err};
  };
  auto strip = [&](double xi, double rt) { return detail::slice_3d(s, pr, hints, xi, rt, -kInf, kInf, &res.n_eval); };
  detail::assemble_evidence(res, marginal, strip, hints, opt);
  return res;
}

inline EvidenceResult log_Cn_full3d(const Sample& s, const PriorSpec& pr, double tol, const MleFit* fit = nullptr) {
  EvidenceOptions o;
  o.tol = tol;
  return log_Cn_full3d(s, pr, o, fit);
}

/// log C_n, the log normalizing constant of likelihood x prior.
///
/// Scale-invariant priors use the tau-reduced integrand on xi < -delta and
/// xi > delta, plus a 3D strip on |xi| < delta; proper priors use the full
/// 3D route.
inline EvidenceResult log_Cn(const Sample& s, const PriorSpec& pr, const EvidenceOptions& opt,
                             const MleFit* fit = nullptr) {
  if (!pr.scale_invariant() || opt.full3d) return log_Cn_full3d(s, pr, opt, fit);
  require(s.n() >= 3, "log_Cn: need at least 3 observations");
  require(opt.tol > 0.0, "log_Cn: tol must be positive");
  std::optional<MleFit> own;
  if (fit == nullptr) {
    own = fit_gev(s);
    fit = &*own;
  }
  detail::Hints hints(s, fit);
  ReducedIntegrand ri(s, pr);
  EvidenceResult res;
  res.method = EvidenceMethod::Reduced2D;
  auto marginal = [&](double xi, double rt) -> LogValue {
    auto [xc, xs] = hints.x_hint(xi);
    PeakOptions o;
    o.center = xc;
    o.scale = xs;
    o.rel_tol = rt;
    const LogIntegral r = integrate_log_peaked([&](double x) { return ri.eval(xi, x).f; }, o);
    res.n_eval += r.n_eval;
    return {r.log_value, r.log_err};
  };
  auto strip = [&](double xi, double rt) { return detail::slice_3d(s, pr, hints, xi, rt, -kInf, kInf, &res.n_eval); };
  detail::assemble_evidence(res, marginal, strip, hints, opt);
  return res;
}

inline EvidenceResult log_Cn(const Sample& s, const PriorSpec& pr, double tol) {
  EvidenceOptions o;
  o.tol = tol;
  return log_Cn(s, pr, o);
}

/// Radii r < r1, r2, r3 of the sub-region partition around theta0 (xi0 > 0).
struct RegionRadii {
  double r = 0.2;
  double r1 = kNaN;
  double r2 = kNaN;
  double r3 = kNaN;      // may overflow; log_r3 is authoritative
  double log_r3 = kNaN;
};

/// Smallest radii meeting the three partition inequalities, padded by 1%.
inline RegionRadii region_radii(const GevParams& theta0, double r = 0.2) {
  require(theta0.valid(), "region_radii: invalid parameters");
  require(theta0.xi > 0.0, "region_radii: the partition is defined for xi0 > 0 only");
  require(r > 0.0, "region_radii: r must be positive");
  const double xi0 = theta0.xi, tau0 = theta0.tau;
  RegionRadii rr;
  rr.r = r;
  const double t1 = 4.0 / xi0 - std::log(2.0) + kEulerGamma;
  rr.r1 = std::max(1.01 * xi0 * std::expm1(t1), 1.01 * r);
  rr.r2 = std::max(1.01, 1.01 * r);
  const double a = xi0 + rr.r1 + 1.0;
  const double t3 = a * (std::log(a) - 1.0) + (1.0 + xi0) * kEulerGamma + 1.0;
  // r3 = tau0 (e^{t3} - 1), padded by 1%, kept in logs
  const double log_r3_min = std::log(tau0) + (t3 > 30.0 ? t3 : std::log(std::expm1(t3)));
  // for tiny xi0 the bound is so large that a 1% pad would vanish in rounding
  const double pad = std::max(std::log(1.01), 1e-12 * std::abs(log_r3_min));
  rr.log_r3 = std::max(log_r3_min + pad, std::log(1.01 * r));
  rr.r3 = std::exp(rr.log_r3);
  return rr;
}

/// True when the radii satisfy the partition inequalities for theta0.
inline bool radii_valid(const RegionRadii& rr, const GevParams& theta0) {
  const double xi0 = theta0.xi, tau0 = theta0.tau;
  if (!(rr.r1 > rr.r && rr.r2 > rr.r && rr.log_r3 > std::log(rr.r))) return false;
  const bool c1 = std::log1p(rr.r1 / xi0) > 4.0 / xi0 - std::log(2.0) + kEulerGamma;
  const bool c2 = rr.r2 > 1.0;
  const double a = xi0 + rr.r1 + 1.0;
  const double rhs = a * (std::log(a) - 1.0) + (1.0 + xi0) * kEulerGamma + 1.0;
  // log(1 + r3/tau0) evaluated without forming r3
  const double lr = rr.log_r3 - std::log(tau0);
  const double lhs = lr > 30.0 ? lr + std::log1p(std::exp(-lr)) : std::log1p(std::exp(lr));
  return c1 && c2 && lhs > rhs;
}

/// Log-masses of the five sub-regions and of the ball B_r(theta_hat).
///
/// Sub-regions, in (tau, beta, xi) with (tau_c, beta_c, xi_c) the partition
/// centre (theta_hat unless given):
///   1: 0 < xi < xi_c + r1, beta > beta_c - r2, tau < tau_c + r3, outside the ball
///   2: xi > xi_c + r1
///   3: 0 < xi < xi_c + r1, beta < beta_c - r2, tau < tau_c + r3, outside the ball
///   4: 0 < xi < xi_c + r1, tau > tau_c + r3
///   5: -1/2 < xi < 0
/// The tau-integral is split with regularized incomplete gamma weights.
inline RegionMasses region_masses(const Sample& s, const PriorSpec& pr, const RegionRadii& rr, const MleFit& fit,
                                  double tol, const GevParams* centre = nullptr, double seam_delta = 1e-4) {
  require(pr.scale_invariant(), "region_masses: needs a scale-invariant prior");
  require(fit.converged, "region_masses: fit did not converge");
  require(s.n() >= 3, "region_masses: need at least 3 observations");
  const GevParams& th = fit.theta_hat;
  require(th.xi > rr.r, "region_masses: requires xi_hat > r so the ball lies in xi > 0");
  require(rr.r1 > rr.r && rr.r2 > rr.r && rr.log_r3 > std::log(rr.r), "region_masses: radii must exceed r");
  const GevParams c = centre ? *centre : th;
  require(c.xi > 0.0, "region_masses: partition centre needs xi > 0");
  const double beta_c = c.mu - c.tau / c.xi;
  const double xi_top = c.xi + rr.r1;
  const double log_T = log_add_exp(std::log(c.tau), rr.log_r3);
  const double logD3 = std::log(s.min() - beta_c + rr.r2);
  const double n = static_cast<double>(s.n());
  const double r = rr.r, delta = seam_delta;

  detail::Hints hints(s, &fit);
  ReducedIntegrand ri(s, pr);
  RegionMasses out;

  // z(tau) = tau^{1/xi} S
  auto log_z = [](double log_tau, double xi, double log_s) { return log_tau / xi + log_s; };

  // ball tau-interval at (xi, beta); empty -> false
  auto ball_tau = [&](double xi, double beta, double& t1, double& t2) {
    const double rho2 = r * r - (xi - th.xi) * (xi - th.xi);
    if (rho2 <= 0.0) return false;
    const double A = 1.0 + 1.0 / (xi * xi);
    const double B = -2.0 * th.tau + 2.0 * (beta - th.mu) / xi;
    const double C = th.tau * th.tau + (beta - th.mu) * (beta - th.mu) - rho2;
    const double disc = B * B - 4.0 * A * C;
    if (disc <= 0.0) return false;
    const double sq = std::sqrt(disc);
    // stable roots
    const double qq = -0.5 * (B + std::copysign(sq, B));
    double a1 = qq / A, a2 = C / qq;
    if (a1 > a2) std::swap(a1, a2);
    t1 = std::max(a1, 0.0);
    t2 = a2;
    return t2 > t1;
  };

  // channel log-weights; 0: R1/R3 remainder, 1: R4, 2: ball
  auto weight = [&](int ch, double xi, double x, double log_s) -> double {
    const double lzT = log_z(log_T, xi, log_s);
    const auto gT = log_inc_gamma_logz(n, lzT);
    if (ch == 1) return gT.log_q;
    const double beta = s.min() - std::exp(x);
    double t1, t2;
    const bool in_ball = ball_tau(xi, beta, t1, t2);
    if (ch == 2) {
      if (!in_ball) return -kInf;
      const auto g1 = t1 > 0.0 ? log_inc_gamma_logz(n, log_z(std::log(t1), xi, log_s)) : LogIncGamma{-kInf, 0.0};
      const auto g2 = log_inc_gamma_logz(n, log_z(std::log(t2), xi, log_s));
      if (g2.log_p < std::log(0.5)) return log_sub_exp(g2.log_p, g1.log_p);
      if (g1.log_q < std::log(0.5)) return log_sub_exp(g1.log_q, g2.log_q);
      return std::log1p(-(std::exp(g1.log_p) + std::exp(g2.log_q)));
    }
    if (!in_ball) return gT.log_p;
    const auto g1 = t1 > 0.0 ? log_inc_gamma_logz(n, log_z(std::log(t1), xi, log_s)) : LogIncGamma{-kInf, 0.0};
    const auto g2 = log_inc_gamma_logz(n, log_z(std::log(t2), xi, log_s));
    return log_add_exp(g1.log_p, log_sub_exp(g2.log_q, gT.log_q));
  };

  auto channel_marginal = [&](int ch, double x_lo, double x_hi) {
    return [&, ch, x_lo, x_hi](double xi, double rt) -> LogValue {
      auto [xc, xs] = hints.x_hint(xi);
      PeakOptions o;
      o.lo = x_lo;
      o.hi = x_hi;
      o.center = xc;
      o.scale = xs;
      o.rel_tol = rt;
      if (ch == 2) {
        // the ball's beta-range at this xi
        const double rho2 = r * r - (xi - th.xi) * (xi - th.xi);
        if (rho2 <= 0.0) return {};
        const double bc = th.mu - th.tau / xi;
        const double half = std::sqrt(rho2 * (1.0 + 1.0 / (xi * xi)));
        const double Dlo = s.min() - bc - half, Dhi = s.min() - bc + half;
        if (!(Dhi > 0.0)) return {};
        o.lo = Dlo > 0.0 ? std::log(Dlo) : -kInf;
        o.hi = std::log(Dhi);
        o.center = std::log(std::max(s.min() - bc, 0.5 * Dhi));
      }
      auto f = [&](double x) {
        const auto v = ri.eval(xi, x);
        if (!(v.f > -kInf)) return -kInf;
        return v.f + weight(ch, xi, x, v.log_s);
      };
      const LogIntegral res = integrate_log_peaked(f, o);
      return {res.log_value, res.log_err};
    };
  };

  auto put = [&](int k, const detail::PieceResult& p) {
    double& slot = k == 5 ? out.log_ball : out.log_mass[k];
    const double old = slot;
    const double tot = log_add_exp(old, p.log_value);
    double e = 0.0;
    if (old > -kInf) e += out.log_err[k] * std::exp(old - tot);
    if (p.log_value > -kInf) e += p.rel_err * std::exp(p.log_value - tot);
    slot = tot;
    out.log_err[k] = e;
    out.converged[k] = out.converged[k] && p.converged;
  };

  const double xh = th.xi, xsd = std::max(hints.xi_sd(), 1e-4);
  std::vector<double> probes;
  for (double q = delta * 2.0; q < xi_top; q *= 2.0) probes.push_back(q);
  probes.push_back(0.5 * (delta + xi_top));

  // region 1 and 3: x below / above log D3
  put(0, detail::xi_branch(channel_marginal(0, -kInf, logD3), delta, xi_top, xh, xsd, tol, 0, 0, nullptr, probes));
  put(2, detail::xi_branch(channel_marginal(0, logD3, kInf), delta, xi_top, xh, xsd, tol, 0, 0, nullptr, probes));
  put(3, detail::xi_branch(channel_marginal(1, -kInf, kInf), delta, xi_top, xh, xsd, tol, 0, 0, nullptr, probes));
  put(5, detail::xi_branch(channel_marginal(2, -kInf, kInf), std::max(delta, th.xi - r), th.xi + r, xh, xsd, tol, 0,
                           0, nullptr));

  auto base = [&](double xi, double rt) -> LogValue {
    auto [xc, xs] = hints.x_hint(xi);
    PeakOptions o;
    o.center = xc;
    o.scale = xs;
    o.rel_tol = rt;
    const LogIntegral res = integrate_log_peaked([&](double x) { return ri.eval(xi, x).f; }, o);
    return {res.log_value, res.log_err};
  };
  put(1, detail::xi_branch(base, xi_top, kInf, xi_top * 1.000001, std::max(xsd, 0.1 * xi_top), tol, xi_top + 10.0,
                           40, nullptr));
  put(4, detail::xi_branch(base, -0.5, -delta, -2.0 * delta, xsd, tol, 0, 0, nullptr, {-0.4, -0.25, -0.1}));

  // strips next to xi = 0 in (tau, mu, xi) coordinates
  const double seam_tol = std::max(tol, 1e-3);
  put(4, detail::kronrod7_log([&](double xi) { return detail::slice_3d(s, pr, hints, xi, 0.1 * seam_tol); }, -delta,
                              0.0));
  // at 0 < xi < delta, beta = mu - tau/xi lies far below beta_c - r2, so the
  // strip belongs to region 3 (tau < T) or region 4 (tau > T)
  put(2, detail::kronrod7_log(
             [&](double xi) { return detail::slice_3d(s, pr, hints, xi, 0.1 * seam_tol, -kInf, log_T); }, 0.0, delta));
  if (log_T < 600.0)
    put(3, detail::kronrod7_log(
               [&](double xi) { return detail::slice_3d(s, pr, hints, xi, 0.1 * seam_tol, log_T, kInf); }, 0.0,
               delta));
  return out;
}

}  // namespace gevbayes
