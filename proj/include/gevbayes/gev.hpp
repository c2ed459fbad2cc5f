#pragma once

#include "numerics.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace gevbayes {

/// GEV parameters: scale tau > 0, location mu, shape xi.
struct GevParams {
  double tau = 1.0;
  double mu = 0.0;
  double xi = 0.0;

  Vec3 vec() const { return Vec3(tau, mu, xi); }
  static GevParams from_vec(const Vec3& v) { return {v[0], v[1], v[2]}; }
  bool valid() const { return tau > 0.0 && std::isfinite(tau) && std::isfinite(mu) && std::isfinite(xi); }
  bool in_theta() const { return valid() && xi > -0.5; }
  friend bool operator==(const GevParams&, const GevParams&) = default;
};

/// Endpoint coordinates: beta = mu - tau/xi is the finite end of the support.
struct GevParamsBeta {
  double tau = 1.0;
  double beta = 0.0;
  double xi = 1.0;
};

inline GevParamsBeta to_beta(const GevParams& p) {
  require(p.xi != 0.0, "to_beta: undefined at xi = 0");
  require(p.valid(), "to_beta: invalid parameters");
  return {p.tau, p.mu - p.tau / p.xi, p.xi};
}

inline GevParams from_beta(const GevParamsBeta& b) {
  require(b.xi != 0.0, "from_beta: undefined at xi = 0");
  require(b.tau > 0.0, "from_beta: tau must be positive");
  return {b.tau, b.beta + b.tau / b.xi, b.xi};
}

/// Observations held in ascending order.
class Sample {
 public:
  Sample() = default;
  explicit Sample(std::vector<double> values) : v_(std::move(values)) {
    require(!v_.empty(), "Sample: need at least one observation");
    for (double x : v_) require(std::isfinite(x), "Sample: observations must be finite");
    std::sort(v_.begin(), v_.end());
  }

  std::size_t n() const noexcept { return v_.size(); }
  std::size_t size() const noexcept { return v_.size(); }
  double operator[](std::size_t i) const noexcept { return v_[i]; }
  double min() const noexcept { return v_.front(); }
  double max() const noexcept { return v_.back(); }
  const std::vector<double>& values() const noexcept { return v_; }
  auto begin() const noexcept { return v_.begin(); }
  auto end() const noexcept { return v_.end(); }

 private:
  std::vector<double> v_;
};

/// Below this |xi| the Gumbel limit is used exactly.
inline constexpr double kGumbelXi = 1e-8;

/// h = log(1 + xi z)/xi together with its first two xi-derivatives at fixed z.
///
/// Direct evaluation of the derivatives cancels badly when xi z is small, so
/// that band uses the power series in u = xi z.
struct ShapeLog {
  double h, h_xi, h_xixi;
};

inline ShapeLog shape_log(double xi, double z) noexcept {
  const double u = xi * z;
  if (std::abs(xi) < kGumbelXi) return {z, -0.5 * z * z, 2.0 * z * z * z / 3.0};
  if (std::abs(u) < 0.1) {
    // h = z sum_{k>=1} (-u)^{k-1}/k
    // h_xi = z^2 sum_{k>=2} (-1)^{k+1} (k-1)/k u^{k-2}
    // h_xixi = z^3 sum_{k>=3} (-1)^{k+1} (k-1)(k-2)/k u^{k-3}
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    double p0 = 1.0, p1 = 1.0, p2 = 1.0;  // u^{k-1}, u^{k-2}, u^{k-3}
    for (int k = 1; k <= 27; ++k) {
      const double sg = (k % 2) ? 1.0 : -1.0;
      s0 += sg * p0 / k;
      p0 *= u;
      if (k >= 2) {
        s1 += sg * (k - 1.0) / k * p1;
        p1 *= u;
      }
      if (k >= 3) {
        s2 += sg * (k - 1.0) * (k - 2.0) / k * p2;
        p2 *= u;
      }
    }
    return {z * s0, z * z * s1, z * z * z * s2};
  }
  const double L = std::log1p(u);
  const double r = u / (1.0 + u);
  return {L / xi, (r - L) / (xi * xi), (2.0 * L - 2.0 * r - r * r) / (xi * xi * xi)};
}

/// h alone; cheaper than shape_log when derivatives are not needed.
inline double shape_h(double xi, double z) noexcept {
  if (std::abs(xi) < kGumbelXi) return z;
  return std::log1p(xi * z) / xi;
}

inline double gev_cdf(const GevParams& p, double y) {
  require(p.valid(), "gev_cdf: invalid parameters");
  const double z = (y - p.mu) / p.tau;
  if (std::abs(p.xi) >= kGumbelXi && 1.0 + p.xi * z <= 0.0) return p.xi > 0.0 ? 0.0 : 1.0;
  return std::exp(-std::exp(-shape_h(p.xi, z)));
}

/// Log density; -inf outside the support.
inline double gev_log_pdf(const GevParams& p, double y) {
  require(p.valid(), "gev_log_pdf: invalid parameters");
  const double z = (y - p.mu) / p.tau;
  if (std::abs(p.xi) >= kGumbelXi && 1.0 + p.xi * z <= 0.0) return -kInf;
  const double h = shape_h(p.xi, z);
  return -std::log(p.tau) - (p.xi + 1.0) * h - std::exp(-h);
}

inline double gev_quantile(const GevParams& p, double q) {
  require(p.valid(), "gev_quantile: invalid parameters");
  require(q > 0.0 && q < 1.0, "gev_quantile: q must lie in (0, 1)");
  const double h = -std::log(-std::log(q));
  if (std::abs(p.xi) < kGumbelXi) return p.mu + p.tau * h;
  return p.mu + p.tau * std::expm1(p.xi * h) / p.xi;
}

/// n draws by inverse CDF from Philox(seed), returned sorted.
inline Sample gev_sample(const GevParams& p, std::size_t n, std::uint64_t seed, std::uint64_t stream = 0) {
  require(n >= 1, "gev_sample: n must be positive");
  require(p.valid(), "gev_sample: invalid parameters");
  Philox4x32 rng(seed, stream);
  std::vector<double> v(n);
  for (auto& x : v) x = gev_quantile(p, rng.uniform());
  return Sample(std::move(v));
}

/// w_i = 1 + xi (Y_i - mu)/tau. At xi ~ 0 the entries are the standardized
/// z_i and `gumbel_branch` is set.
struct WValues {
  std::vector<double> w;
  bool gumbel_branch = false;
};

inline WValues w_values(const GevParams& p, const Sample& s) {
  require(p.valid(), "w_values: invalid parameters");
  WValues out;
  out.w.reserve(s.n());
  out.gumbel_branch = std::abs(p.xi) < kGumbelXi;
  for (double y : s) {
    const double z = (y - p.mu) / p.tau;
    out.w.push_back(out.gumbel_branch ? z : 1.0 + p.xi * z);
  }
  return out;
}

/// Parameters give positive likelihood to every observation.
inline bool omega_contains(const GevParams& p, const Sample& s) {
  if (!p.valid()) return false;
  if (std::abs(p.xi) < kGumbelXi) return true;
  const double y = p.xi > 0.0 ? s.min() : s.max();
  return 1.0 + p.xi * ((y - p.mu) / p.tau) > 0.0;
}

}  // namespace gevbayes
