#pragma once

#include "numerics.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <queue>
#include <type_traits>
#include <utility>
#include <vector>

namespace gevbayes {

/// Result of an adaptive 1D integration.
struct QuadResult {
  double value = 0.0;
  double abs_err = 0.0;
  double aux = 0.0;  // integral of the optional auxiliary channel
  int n_eval = 0;
  int n_intervals = 0;
  bool converged = false;
};

namespace detail {

inline constexpr std::array<double, 8> kGkNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr std::array<double, 8> kGkWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for nodes kGkNodes[1], [3], [5], [7]
inline constexpr std::array<double, 4> kGWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
std::pair<double, double> eval_pair(F& f, double x) {
  using R = std::invoke_result_t<F&, double>;
  if constexpr (std::is_arithmetic_v<R>) {
    return {static_cast<double>(f(x)), 0.0};
  } else {
    auto r = f(x);
    return {r.first, r.second};
  }
}

struct Panel {
  double a, b, value, err, aux;
};

template <class F>
Panel gk15(F& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  auto [fc, ac] = eval_pair(f, c);
  double k = fc * kGkWeights[7], g = fc * kGWeights[3], aux = ac * kGkWeights[7];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kGkNodes[j];
    auto [f1, a1] = eval_pair(f, c - dx);
    auto [f2, a2] = eval_pair(f, c + dx);
    k += kGkWeights[j] * (f1 + f2);
    aux += kGkWeights[j] * (a1 + a2);
    if (j % 2 == 1) g += kGWeights[j / 2] * (f1 + f2);
  }
  Panel p{a, b, k * h, std::abs((k - g) * h), aux * h};
  if (!std::isfinite(p.value)) p.err = kInf;
  return p;
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7/15) on [a, b], both finite.
///
/// The integrand may return a double or a pair (value, aux); the aux channel
/// is integrated on the same panels without error control. Optional interior
/// breakpoints seed the initial partition.
template <class F>
QuadResult gauss_kronrod(F&& f, double a, double b, double abs_tol, double rel_tol,
                         int max_intervals = 2000, std::vector<double> breaks = {}) {
  require(std::isfinite(a) && std::isfinite(b), "gauss_kronrod: limits must be finite");
  QuadResult out;
  if (a == b) {
    out.converged = true;
    return out;
  }
  double sign = 1.0;
  if (b < a) {
    std::swap(a, b);
    sign = -1.0;
  }
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::remove_if(breaks.begin(), breaks.end(), [&](double x) { return !(x >= a && x <= b); }),
               breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  auto cmp = [](const detail::Panel& x, const detail::Panel& y) { return x.err < y.err; };
  std::priority_queue<detail::Panel, std::vector<detail::Panel>, decltype(cmp)> heap(cmp);
  CompensatedSum total, err;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    auto p = detail::gk15(f, breaks[i], breaks[i + 1]);
    out.n_eval += 15;
    heap.push(p);
  }
  auto totals = [&]() {
    CompensatedSum v, e, x;
    auto copy = heap;
    while (!copy.empty()) {
      v += copy.top().value;
      e += copy.top().err;
      x += copy.top().aux;
      copy.pop();
    }
    return std::array<double, 3>{v.value(), e.value(), x.value()};
  };
  // Running totals are tracked incrementally and refreshed periodically to
  // keep rounding from drifting.
  auto t = totals();
  double value = t[0], error = t[1], aux = t[2];
  int since_refresh = 0;
  while (static_cast<int>(heap.size()) < max_intervals) {
    if (error <= std::max(abs_tol, rel_tol * std::abs(value))) {
      out.converged = true;
      break;
    }
    auto worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) break;  // interval exhausted
    heap.pop();
    auto left = detail::gk15(f, worst.a, mid);
    auto right = detail::gk15(f, mid, worst.b);
    out.n_eval += 30;
    value += left.value + right.value - worst.value;
    error += left.err + right.err - worst.err;
    aux += left.aux + right.aux - worst.aux;
    heap.push(left);
    heap.push(right);
    if (++since_refresh == 50 || !std::isfinite(error)) {
      t = totals();
      value = t[0], error = t[1], aux = t[2];
      since_refresh = 0;
    }
  }
  t = totals();
  out.value = sign * t[0];
  out.abs_err = t[1];
  out.aux = sign * t[2];
  out.n_intervals = static_cast<int>(heap.size());
  if (!out.converged) out.converged = out.abs_err <= std::max(abs_tol, rel_tol * std::abs(out.value));
  return out;
}

/// Gauss-Legendre nodes and weights on [-1, 1].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int m) {
  require(m >= 1, "gauss_legendre: need at least one node");
  std::vector<double> x(m), w(m);
  for (int i = 0; i < (m + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (m + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= m; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = m * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = -z;
    x[m - 1 - i] = z;
    w[i] = w[m - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

/// A log-domain value with a relative error estimate attached.
struct LogValue {
  double log_value = -kInf;
  double rel_err = 0.0;
};

/// Options for integrating exp(f) where f is a unimodal-ish log density.
struct PeakOptions {
  double lo = -kInf;
  double hi = kInf;
  double center = 0.0;        // guess for the mode
  double scale = 1.0;         // guess for the width
  double rel_tol = 1e-8;
  double drop = 50.0;         // truncate where f falls this far below its max
  int max_intervals = 400;
  std::vector<double> probes;  // extra candidate locations for the mode
};

struct LogIntegral {
  double log_value = -kInf;
  double log_err = 0.0;  // absolute error of log_value
  double mode = kNaN;
  double mode_log = -kInf;
  double lo = kNaN, hi = kNaN;  // truncation limits actually used
  int n_eval = 0;
  bool converged = true;
};

namespace detail {

template <class F>
LogValue eval_log(F& f, double x) {
  using R = std::invoke_result_t<F&, double>;
  if constexpr (std::is_arithmetic_v<R>) {
    return LogValue{static_cast<double>(f(x)), 0.0};
  } else {
    return f(x);
  }
}

inline double clamp_open(double x, double lo, double hi) {
  if (std::isfinite(lo) && std::isfinite(hi)) {
    const double eps = 1e-12 * (hi - lo);
    return std::clamp(x, lo + eps, hi - eps);
  }
  if (std::isfinite(lo) && x <= lo) return lo + std::max(1e-12, 1e-12 * std::abs(lo));
  if (std::isfinite(hi) && x >= hi) return hi - std::max(1e-12, 1e-12 * std::abs(hi));
  return x;
}

}  // namespace detail

/// Integrate exp(f(x)) over (lo, hi) for a peaked log-integrand f.
///
/// Walks outward from the best of the candidate points in doubling steps to
/// bracket the mode, refines it, re-estimates the width from curvature, then
/// truncates where f drops `drop` below its maximum and hands the rescaled
/// integrand to adaptive Gauss-Kronrod. Relative errors reported by f (for
/// nested use) are integrated alongside and added to the error estimate.
template <class F>
LogIntegral integrate_log_peaked(F&& f, PeakOptions opt) {
  LogIntegral out;
  const double lo = opt.lo, hi = opt.hi;
  require(lo < hi, "integrate_log_peaked: empty domain");
  double scale = opt.scale;
  if (!(scale > 0.0) || !std::isfinite(scale)) scale = 1.0;
  if (std::isfinite(lo) && std::isfinite(hi)) scale = std::min(scale, 0.25 * (hi - lo));

  auto F1 = [&](double x) {
    ++out.n_eval;
    const double v = detail::eval_log(f, x).log_value;
    return std::isnan(v) ? -kInf : v;
  };

  // candidate start
  double c0 = detail::clamp_open(opt.center, lo, hi);
  double best = F1(c0);
  for (double p : opt.probes) {
    if (!(p > lo && p < hi)) continue;
    const double v = F1(p);
    if (v > best) best = v, c0 = p;
  }
  if (best == -kInf) {
    // blind search on a coarse grid
    std::vector<double> grid;
    if (std::isfinite(lo) && std::isfinite(hi)) {
      for (int i = 1; i < 64; ++i) grid.push_back(lo + (hi - lo) * i / 64.0);
    } else {
      for (int k = -30; k <= 30; ++k) {
        const double x = c0 + std::copysign(scale * std::ldexp(1.0, std::abs(k)), k) - (k == 0 ? 0.0 : 0.0);
        if (x > lo && x < hi) grid.push_back(x);
      }
    }
    for (double x : grid) {
      const double v = F1(x);
      if (v > best) best = v, c0 = x;
    }
    if (best == -kInf) return out;  // integrand vanishes identically
  }

  // coarse walk to bracket the mode
  struct Pt {
    double x, f;
  };
  std::vector<Pt> pts{{c0, best}};
  double fmax = best;
  auto walk = [&](double from, double dir, double step, double& end_x, bool& hit_bound) {
    hit_bound = false;
    double x = from;
    for (int k = 0; k < 200; ++k) {
      double xn = from + dir * step;
      if (dir > 0 && xn >= hi) {
        hit_bound = true;
        end_x = hi;
        return;
      }
      if (dir < 0 && xn <= lo) {
        hit_bound = true;
        end_x = lo;
        return;
      }
      if (xn == x) break;
      const double v = F1(xn);
      pts.push_back({xn, v});
      x = xn;
      if (v > fmax) fmax = v;
      if (v < fmax - opt.drop) break;
      step *= 2.0;
    }
    end_x = x;
  };
  {
    double e;
    bool hb;
    walk(c0, +1.0, scale, e, hb);
    walk(c0, -1.0, scale, e, hb);
  }
  std::sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) { return a.x < b.x; });
  std::size_t jb = 0;
  for (std::size_t j = 0; j < pts.size(); ++j)
    if (pts[j].f > pts[jb].f) jb = j;
  const double bl = jb > 0 ? pts[jb - 1].x : (std::isfinite(lo) ? lo : pts[jb].x - scale);
  const double br = jb + 1 < pts.size() ? pts[jb + 1].x : (std::isfinite(hi) ? hi : pts[jb].x + scale);

  // refine the mode inside the bracket
  double xm = pts[jb].x, fm = pts[jb].f;
  {
    const auto neg = [&](double x) { return -F1(detail::clamp_open(x, lo, hi)); };
    auto r = boost::math::tools::brent_find_minima(neg, bl, br, 30);
    if (-r.second > fm) xm = detail::clamp_open(r.first, lo, hi), fm = -r.second;
  }
  fmax = std::max(fmax, fm);

  // width from curvature
  double s = std::min(scale, 0.5 * (br - bl));
  for (int it = 0; it < 40; ++it) {
    const double fp = (xm + s < hi) ? F1(xm + s) : -kInf;
    const double fn = (xm - s > lo) ? F1(xm - s) : -kInf;
    const double drop = fm - std::max(fp, fn);
    if (drop > 4.0) {
      s *= 0.5;
    } else if (drop < 0.02) {
      s *= 2.0;
      if (std::isfinite(lo) && std::isfinite(hi) && s > hi - lo) break;
    } else {
      const double curv = (2.0 * fm - fp - fn);
      if (std::isfinite(curv) && curv > 0.0)
        s = s * std::sqrt(2.0 / std::max(curv, 1e-300));
      else
        s = s / std::sqrt(2.0 * std::max(drop, 1e-300));
      break;
    }
  }
  if (!(s > 0.0) || !std::isfinite(s)) s = scale;

  // final walk from the mode to find truncation limits
  pts.clear();
  pts.push_back({xm, fm});
  fmax = fm;
  double right_end, left_end;
  bool right_hit, left_hit;
  walk(xm, +1.0, s, right_end, right_hit);
  walk(xm, -1.0, s, left_end, left_hit);
  if (fmax > fm + 1e-9) {
    // a higher point turned up during the walk; extend both sides relative to it
    double e;
    bool hb;
    if (!left_hit) walk(left_end, -1.0, s, e, hb), left_end = e, left_hit = hb;
    if (!right_hit) walk(right_end, +1.0, s, e, hb), right_end = e, right_hit = hb;
  }
  std::vector<double> breaks;
  for (const auto& p : pts)
    if (p.x > left_end && p.x < right_end) breaks.push_back(p.x);

  const double offset = fmax;
  double a = left_end, b = right_end;
  auto G = [&](double x) -> std::pair<double, double> {
    ++out.n_eval;
    const LogValue lv = detail::eval_log(f, x);
    if (!(lv.log_value > -kInf)) return {0.0, 0.0};
    const double e = std::exp(lv.log_value - offset);
    return {e, e * lv.rel_err};
  };
  const auto q = gauss_kronrod(G, a, b, 0.0, opt.rel_tol, opt.max_intervals, breaks);
  out.mode = xm;
  out.mode_log = fmax;
  out.lo = a;
  out.hi = b;
  out.converged = q.converged;
  if (!(q.value > 0.0)) {
    out.log_value = -kInf;
    out.log_err = 0.0;
    return out;
  }
  out.log_value = offset + std::log(q.value);
  out.log_err = (q.abs_err + std::abs(q.aux)) / q.value + std::exp(-opt.drop);
  return out;
}

}  // namespace gevbayes
