#pragma once

#include "gev.hpp"
#include "numerics.hpp"
#include "specfun.hpp"

#include <array>
#include <cmath>
#include <map>
#include <tuple>

namespace gevbayes {

/// Log-likelihood of the whole sample; -inf when some w_i <= 0.
inline double log_likelihood(const GevParams& p, const Sample& s) {
  require(p.valid(), "log_likelihood: invalid parameters");
  if (!omega_contains(p, s)) return -kInf;
  const double inv_tau = 1.0 / p.tau;
  CompensatedSum acc;
  for (double y : s) {
    const double h = shape_h(p.xi, (y - p.mu) * inv_tau);
    acc += -(p.xi + 1.0) * h - std::exp(-h);
  }
  return acc.value() - static_cast<double>(s.n()) * std::log(p.tau);
}

/// Value, gradient and Hessian of the log-likelihood, in (tau, mu, xi) order.
struct LogLikDerivs {
  double value = 0.0;
  Vec3 grad = Vec3::Zero();
  Mat3 hess = Mat3::Zero();
};

/// Analytic derivatives by the chain rule through h = log(1 + xi z)/xi.
///
/// Per observation l = -log tau - (xi+1) h - e^{-h}; z = (y - mu)/tau.
inline LogLikDerivs loglik_derivatives(const GevParams& p, const Sample& s) {
  require(p.valid(), "loglik_derivatives: invalid parameters");
  if (!omega_contains(p, s)) throw SupportError("loglik_derivatives: parameters outside the support");
  const double tau = p.tau, xi = p.xi;
  const double it = 1.0 / tau;
  std::array<CompensatedSum, 10> acc;  // value, 3 grad, 6 hess (tt, tm, tx, mm, mx, xx)
  for (double y : s) {
    const double z = (y - p.mu) * it;
    const ShapeLog sh = shape_log(xi, z);
    const double w = 1.0 + xi * z;
    const double iw = 1.0 / w;
    const double t = std::exp(-sh.h);
    const double hz = iw, hzz = -xi * iw * iw, hzx = -z * iw * iw;
    const double zt = -z * it, zm = -it;
    const double ztt = 2.0 * z * it * it, ztm = it * it;
    const double dh[3] = {hz * zt, hz * zm, sh.h_xi};
    const double Fh = t - (xi + 1.0), Fhh = -t;
    // d2h entries
    const double d_tt = hzz * zt * zt + hz * ztt;
    const double d_tm = hzz * zt * zm + hz * ztm;
    const double d_mm = hzz * zm * zm;
    const double d_tx = hzx * zt;
    const double d_mx = hzx * zm;
    const double d_xx = sh.h_xixi;
    acc[0] += -(xi + 1.0) * sh.h - t;
    acc[1] += Fh * dh[0];
    acc[2] += Fh * dh[1];
    acc[3] += Fh * dh[2] - sh.h;
    acc[4] += Fhh * dh[0] * dh[0] + Fh * d_tt;
    acc[5] += Fhh * dh[0] * dh[1] + Fh * d_tm;
    acc[6] += Fhh * dh[0] * dh[2] + Fh * d_tx - dh[0];
    acc[7] += Fhh * dh[1] * dh[1] + Fh * d_mm;
    acc[8] += Fhh * dh[1] * dh[2] + Fh * d_mx - dh[1];
    acc[9] += Fhh * dh[2] * dh[2] + Fh * d_xx - 2.0 * dh[2];
  }
  const double n = static_cast<double>(s.n());
  LogLikDerivs out;
  out.value = acc[0].value() - n * std::log(tau);
  out.grad << acc[1].value() - n * it, acc[2].value(), acc[3].value();
  out.hess(0, 0) = acc[4].value() + n * it * it;
  out.hess(0, 1) = out.hess(1, 0) = acc[5].value();
  out.hess(0, 2) = out.hess(2, 0) = acc[6].value();
  out.hess(1, 1) = acc[7].value();
  out.hess(1, 2) = out.hess(2, 1) = acc[8].value();
  out.hess(2, 2) = acc[9].value();
  return out;
}

inline Vec3 score(const GevParams& p, const Sample& s) { return loglik_derivatives(p, s).grad; }
inline Mat3 hessian(const GevParams& p, const Sample& s) { return loglik_derivatives(p, s).hess; }

/// Index (k, a, b) of the structured sum  sum_i w_i^{-k - a/xi} log^b w_i.
struct SumStatIndex {
  int k = 0, a = 0, b = 0;
  SumStatIndex() = default;
  SumStatIndex(int k_, int a_, int b_) : k(k_), a(a_), b(b_) {
    require(k >= 0 && k <= 2 && a >= 0 && a <= 1 && b >= 0 && b <= 2, "SumStatIndex: index out of range");
  }
};

namespace detail {
inline double sum_stat_raw(const GevParams& p, const Sample& s, int k, int a, int b) {
  if (!omega_contains(p, s)) throw SupportError("sum_stat: parameters outside the support");
  const double it = 1.0 / p.tau;
  CompensatedSum acc;
  for (double y : s) {
    const double h = shape_h(p.xi, (y - p.mu) * it);
    const double lw = p.xi * h;  // log w
    double term = std::exp(-k * lw - a * h);
    for (int j = 0; j < b; ++j) term *= lw;
    acc += term;
  }
  return acc.value();
}
}  // namespace detail

inline double sum_stat(const GevParams& p, const Sample& s, SumStatIndex idx) {
  return detail::sum_stat_raw(p, s, idx.k, idx.a, idx.b);
}

/// Limit of n^{-1} sum_stat at the true parameter: (-xi0)^b Gamma^{(b)}(k xi0 + a + 1).
template <class T = double>
T sum_stat_limit(T xi0, int k, int a, int b) {
  const T x = T(k) * xi0 + T(a) + T(1);
  require(x > T(0), "sum_stat_limit: requires k*xi0 + a + 1 > 0");
  T f = 1;
  for (int j = 0; j < b; ++j) f *= -xi0;
  return f * gamma_deriv<T>(x, b);
}

/// Polynomial in the monomials w^{-k} t^a (log w)^b with t = w^{-1/xi}.
///
/// Each Hessian entry of the per-observation log-density is such a
/// polynomial with coefficients depending on (tau, xi); summing over the
/// sample turns every monomial into a sum_stat value.
template <class T>
class SumStatPoly {
 public:
  using Key = std::tuple<int, int, int>;

  SumStatPoly() = default;
  explicit SumStatPoly(T c) {
    if (c != T(0)) terms_[{0, 0, 0}] = c;
  }
  static SumStatPoly mono(int k, int a, int b, T c = T(1)) {
    SumStatPoly p;
    p.terms_[{k, a, b}] = c;
    return p;
  }

  const std::map<Key, T>& terms() const { return terms_; }

  friend SumStatPoly operator+(SumStatPoly x, const SumStatPoly& y) {
    for (const auto& [key, c] : y.terms_) x.terms_[key] += c;
    return x;
  }
  friend SumStatPoly operator-(SumStatPoly x, const SumStatPoly& y) { return x + y * T(-1); }
  friend SumStatPoly operator*(SumStatPoly x, T c) {
    for (auto& [key, v] : x.terms_) v *= c;
    return x;
  }
  friend SumStatPoly operator*(T c, SumStatPoly x) { return x * c; }
  friend SumStatPoly operator*(const SumStatPoly& x, const SumStatPoly& y) {
    SumStatPoly r;
    for (const auto& [kx, cx] : x.terms_)
      for (const auto& [ky, cy] : y.terms_) {
        const Key key{std::get<0>(kx) + std::get<0>(ky), std::get<1>(kx) + std::get<1>(ky),
                      std::get<2>(kx) + std::get<2>(ky)};
        r.terms_[key] += cx * cy;
      }
    return r;
  }

  /// Evaluate with f(k, a, b) supplying the value of each monomial.
  template <class F>
  T eval(F&& f) const {
    T acc = 0;
    for (const auto& [key, c] : terms_) {
      if (c == T(0)) continue;
      acc += c * f(std::get<0>(key), std::get<1>(key), std::get<2>(key));
    }
    return acc;
  }

 private:
  std::map<Key, T> terms_;
};

/// The six distinct per-observation Hessian entries (tt, tm, tx, mm, mx, xx)
/// as SumStatPoly, valid for xi != 0.
template <class T>
std::array<SumStatPoly<T>, 6> hessian_polys(T tau, T xi) {
  using P = SumStatPoly<T>;
  const P one(T(1));
  const P q = P::mono(1, 0, 0), t = P::mono(0, 1, 0), L = P::mono(0, 0, 1), w = P::mono(-1, 0, 0);
  const P z = (w - one) * (T(1) / xi);
  const P hz = q;
  const P hzz = q * q * (-xi);
  const P hzx = (q - q * q) * (T(-1) / xi);
  const P hx = (one - q - L) * (T(1) / (xi * xi));
  const P hxx = (L * T(2) - one * T(3) + q * T(4) - q * q) * (T(1) / (xi * xi * xi));
  const P zt = z * (T(-1) / tau);
  const T zm = T(-1) / tau;
  const P ztt = z * (T(2) / (tau * tau));
  const T ztm = T(1) / (tau * tau);
  const P Fh = t - one * (xi + T(1));
  const P Fhh = t * T(-1);
  const P dh_t = hz * zt, dh_m = hz * zm, dh_x = hx;
  std::array<P, 6> H;
  H[0] = one * (T(1) / (tau * tau)) + Fhh * dh_t * dh_t + Fh * (hzz * zt * zt + hz * ztt);
  H[1] = Fhh * dh_t * dh_m + Fh * (hzz * zt * zm + hz * ztm);
  H[2] = Fhh * dh_t * dh_x + Fh * (hzx * zt) - dh_t;
  H[3] = Fhh * dh_m * dh_m + Fh * (hzz * (zm * zm));
  H[4] = Fhh * dh_m * dh_x + Fh * (hzx * zm) - dh_m;
  H[5] = Fhh * dh_x * dh_x + Fh * hxx - dh_x * T(2);
  return H;
}

namespace detail {
inline Mat3 unpack_sym(const std::array<double, 6>& e) {
  Mat3 m;
  m << e[0], e[1], e[2], e[1], e[3], e[4], e[2], e[4], e[5];
  return m;
}
}  // namespace detail

/// Hessian assembled from sum_stat values; requires xi != 0.
inline Mat3 hessian_via_sum_stat(const GevParams& p, const Sample& s) {
  require(std::abs(p.xi) >= kGumbelXi, "hessian_via_sum_stat: xi must be nonzero");
  if (!omega_contains(p, s)) throw SupportError("hessian_via_sum_stat: parameters outside the support");
  const auto polys = hessian_polys<double>(p.tau, p.xi);
  std::map<std::tuple<int, int, int>, double> cache;
  auto stat = [&](int k, int a, int b) {
    auto key = std::make_tuple(k, a, b);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const double v = detail::sum_stat_raw(p, s, k, a, b);
    cache.emplace(key, v);
    return v;
  };
  std::array<double, 6> e;
  for (int j = 0; j < 6; ++j) e[j] = polys[j].eval(stat);
  return detail::unpack_sym(e);
}

}  // namespace gevbayes
