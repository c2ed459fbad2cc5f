#pragma once

#include "gev.hpp"
#include "numerics.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace gevbayes {

enum class PriorKind { ScaleInvariant, ProperContinuous };

/// A prior on (tau, mu, xi).
///
/// ScaleInvariant priors have density g(xi)/tau, stored as log g. They are
/// improper and defined up to a constant. ProperContinuous priors carry a full
/// log density. Callables must be pure and safe to call concurrently.
struct PriorSpec {
  PriorKind kind = PriorKind::ScaleInvariant;
  std::string name = "flat";
  std::function<double(double)> log_g;  // scale-invariant kind
  double alpha = 0.0;  // regular-variation index; NaN if unknown
  std::function<double(const GevParams&)> log_density;  // proper kind

  bool scale_invariant() const { return kind == PriorKind::ScaleInvariant; }
};

inline double log_prior(const PriorSpec& pr, const GevParams& p) {
  if (!p.valid() || !(p.xi > -0.5)) return -kInf;
  if (pr.kind == PriorKind::ScaleInvariant) return pr.log_g(p.xi) - std::log(p.tau);
  return pr.log_density(p);
}

/// g = 1.
inline PriorSpec flat_prior() {
  PriorSpec pr;
  pr.name = "flat";
  pr.log_g = [](double) { return 0.0; };
  pr.alpha = 0.0;
  return pr;
}

/// g = (1 + xi)^alpha.
inline PriorSpec power_prior(double alpha) {
  PriorSpec pr;
  pr.name = "power:" + std::to_string(alpha);
  pr.log_g = [alpha](double xi) { return alpha * std::log1p(xi); };
  pr.alpha = alpha;
  return pr;
}

/// g = exp(-c xi) up to `knot`, continued by a power tail so that g is
/// regularly varying with index -c * knot.
inline PriorSpec expdecay_prior(double c, double knot) {
  require(c >= 0.0 && knot > 0.0, "expdecay_prior: need c >= 0 and knot > 0");
  PriorSpec pr;
  pr.name = "expdecay:" + std::to_string(c) + "," + std::to_string(knot);
  pr.log_g = [c, knot](double xi) {
    if (xi <= knot) return -c * xi;
    return -c * knot - c * knot * std::log(xi / knot);
  };
  pr.alpha = -c * knot;
  return pr;
}

inline PriorSpec custom_prior(std::string name, std::function<double(double)> log_g, double alpha) {
  PriorSpec pr;
  pr.name = std::move(name);
  pr.log_g = std::move(log_g);
  pr.alpha = alpha;
  return pr;
}

/// Proper prior: log tau ~ N(m_lt, s_lt), mu ~ N(m_mu, s_mu), xi ~ N(m_xi, s_xi)
/// truncated to xi > -1/2, independent.
inline PriorSpec normal_proper_prior(double m_lt, double s_lt, double m_mu, double s_mu, double m_xi,
                                     double s_xi) {
  require(s_lt > 0.0 && s_mu > 0.0 && s_xi > 0.0, "normal_proper_prior: scales must be positive");
  PriorSpec pr;
  pr.kind = PriorKind::ProperContinuous;
  pr.name = "normal";
  const double trunc = std::log(norm_cdf((m_xi + 0.5) / s_xi));
  pr.log_density = [=](const GevParams& p) {
    if (!(p.tau > 0.0) || !(p.xi > -0.5)) return -kInf;
    const double lt = std::log(p.tau);
    auto ln = [](double x, double m, double s) {
      const double u = (x - m) / s;
      return -0.5 * u * u - std::log(s) - 0.5 * kLog2Pi;
    };
    // density of tau is the lognormal one: N(log tau) / tau
    return ln(lt, m_lt, s_lt) - lt + ln(p.mu, m_mu, s_mu) + ln(p.xi, m_xi, s_xi) - trunc;
  };
  return pr;
}

struct Condition1Report {
  bool bounded_ok = false;
  double rv_index_estimate = kNaN;
  bool rv_ok = false;
  std::array<double, 4> sup_log_g{};  // on [-1/2, c], c in {0, 1, 5, 20}
};

/// Numerical check that g is bounded near -1/2 and on compacts, and
/// regularly varying at infinity.
inline Condition1Report validate_condition1(const PriorSpec& pr) {
  require(pr.kind == PriorKind::ScaleInvariant, "validate_condition1: needs a scale-invariant prior");
  Condition1Report rep;
  // behaviour as xi -> -1/2 from above
  std::vector<double> edge;
  for (int j = 1; j <= 12; ++j) edge.push_back(pr.log_g(-0.5 + std::pow(10.0, -j)));
  bool edge_ok = true;
  for (double v : edge) edge_ok = edge_ok && std::isfinite(v);
  if (edge_ok) {
    // bounded if log g settles over the last decades
    const double d1 = edge[11] - edge[9], d2 = edge[9] - edge[7];
    edge_ok = !(d1 > 0.1 && d2 > 0.1) && edge[11] < 700.0;
  }
  const std::array<double, 4> cs = {0.0, 1.0, 5.0, 20.0};
  bool grid_ok = true;
  for (std::size_t k = 0; k < cs.size(); ++k) {
    double sup = -kInf;
    const int m = 2000;
    for (int i = 1; i <= m; ++i) {
      const double xi = -0.5 + (cs[k] + 0.5) * i / m;
      const double v = pr.log_g(xi);
      if (std::isnan(v) || v == kInf) grid_ok = false;
      sup = std::max(sup, v);
    }
    for (double v : edge) sup = std::max(sup, v);
    rep.sup_log_g[k] = sup;
    grid_ok = grid_ok && std::isfinite(sup);
  }
  rep.bounded_ok = edge_ok && grid_ok;

  // slope estimates (log g(t x) - log g(x)) / log t
  const std::array<double, 3> xs = {1e2, 1e3, 1e4};
  const std::array<double, 2> ts = {2.0, 5.0};
  std::array<double, 3> mean_slope{};
  bool finite = true;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double acc = 0.0;
    for (double t : ts) {
      const double d = (pr.log_g(t * xs[i]) - pr.log_g(xs[i])) / std::log(t);
      finite = finite && std::isfinite(d);
      acc += d;
    }
    mean_slope[i] = acc / ts.size();
  }
  rep.rv_index_estimate = mean_slope[2];
  if (finite) {
    const double tol = std::max(0.05 * std::abs(rep.rv_index_estimate), 0.05);
    rep.rv_ok = std::abs(mean_slope[2] - mean_slope[1]) < tol && std::abs(mean_slope[1] - mean_slope[0]) < 4.0 * tol;
    // the declared index, when given, must match the estimate
    if (std::isfinite(pr.alpha)) rep.rv_ok = rep.rv_ok && std::abs(rep.rv_index_estimate - pr.alpha) < tol;
  }
  return rep;
}

}  // namespace gevbayes
