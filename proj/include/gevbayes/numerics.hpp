#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gevbayes {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kEulerGamma = 0.57721566490153286060651209008240243;
inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kLog2Pi = 1.83787706640934548356065947281123527;

/// Input lies outside the support of the likelihood.
struct SupportError : std::domain_error {
  using std::domain_error::domain_error;
};

/// An iterative routine failed to produce a usable answer.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Neumaier's variant of Kahan summation.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      c_ += (sum_ - t) + x;
    else
      c_ += (x - t) + sum_;
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }
  double value() const noexcept { return sum_ + c_; }

 private:
  double sum_ = 0.0;
  double c_ = 0.0;
};

/// log(exp(a) + exp(b)) without overflow.
inline double log_add_exp(double a, double b) noexcept {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

/// Streaming log-sum-exp accumulator.
class LogSumExp {
 public:
  void add(double x) noexcept {
    if (x == -kInf) return;
    if (x <= max_) {
      sum_ += std::exp(x - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - x) + 1.0;
      max_ = x;
    }
  }
  double value() const noexcept {
    if (max_ == -kInf) return -kInf;
    return max_ + std::log(sum_);
  }

 private:
  double max_ = -kInf;
  double sum_ = 0.0;
};

inline double log_sum_exp(std::span<const double> xs) noexcept {
  double m = -kInf;
  for (double x : xs) m = std::max(m, x);
  if (m == -kInf || !std::isfinite(m)) return m;
  CompensatedSum s;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s.value());
}

/// log(1 - exp(-a)) for a >= 0 (Maechler's switch).
inline double log1mexp(double a) noexcept {
  if (a < 0.0) return kNaN;
  if (a == 0.0) return -kInf;
  return a <= 0.6931471805599453 ? std::log(-std::expm1(-a)) : std::log1p(-std::exp(-a));
}

/// log(exp(a) - exp(b)) for a >= b.
inline double log_sub_exp(double a, double b) noexcept {
  if (b == -kInf) return a;
  if (b > a) return kNaN;
  return a + log1mexp(a - b);
}

/// Standard normal CDF.
inline double norm_cdf(double x) noexcept {
  if (x == kInf) return 1.0;
  if (x == -kInf) return 0.0;
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace gevbayes
