#pragma once

// Independent reference implementations used only by tests. They compute the
// same quantities as the library through different numerics (series and
// quadrature instead of rational approximations and closed forms), so
// agreement is meaningful evidence rather than an identity.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "piqd/split_normal.hpp"

namespace piqd::testing {

// erf via its Maclaurin series for small arguments (the alternating series
// loses digits to cancellation past |x| ~ 2) and composite Simpson
// integration of the Gaussian density elsewhere. Accurate to ~1e-15.
inline double oracle_erf(double x) {
  if (x < 0.0) return -oracle_erf(-x);
  const double two_over_sqrt_pi = 1.1283791670955125738961589031;
  if (x <= 2.0) {
    double term = x;  // x^(2k+1) / k!
    double sum = x;   // series total before the 2/sqrt(pi) factor
    for (int k = 1; k < 400; ++k) {
      term *= -x * x / k;
      double add = term / (2.0 * k + 1.0);
      sum += add;
      if (std::fabs(add) < 1e-18 * std::fabs(sum)) break;
    }
    return two_over_sqrt_pi * sum;
  }
  if (x > 7.0) return 1.0;
  // Simpson with h = x / 40000 (truncation ~1e-17) and Kahan-compensated
  // accumulation, so the oracle stays good to ~2e-15.
  const std::size_t n = 40000;  // even
  double h = x / static_cast<double>(n);
  auto f = [](double t) { return std::exp(-t * t); };
  double sum = f(0.0) + f(x), carry = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    double term = f(h * static_cast<double>(i)) * (i % 2 == 1 ? 4.0 : 2.0);
    double y = term - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  return two_over_sqrt_pi * sum * h / 3.0;
}

// Cumulative trapezoid integration of an arbitrary density over [lo, hi].
// cdf() interpolates the cumulative table; quantile() bisects on cdf().
class TrapezoidCdf {
 public:
  TrapezoidCdf(std::function<double(double)> pdf, double lo, double hi,
               std::size_t cells = 400000)
      : lo_(lo), hi_(hi), step_((hi - lo) / static_cast<double>(cells)) {
    if (!(hi > lo) || cells < 2)
      throw std::invalid_argument("TrapezoidCdf: bad grid");
    cum_.resize(cells + 1);
    cum_[0] = 0.0;
    double prev = pdf(lo);
    for (std::size_t i = 1; i <= cells; ++i) {
      double x = lo + step_ * static_cast<double>(i);
      double cur = pdf(x);
      cum_[i] = cum_[i - 1] + 0.5 * (prev + cur) * step_;
      prev = cur;
    }
    total_ = cum_.back();
  }

  double cdf(double x) const {
    if (x <= lo_) return 0.0;
    if (x >= hi_) return 1.0;
    double pos = (x - lo_) / step_;
    std::size_t i = static_cast<std::size_t>(pos);
    if (i >= cum_.size() - 1) return 1.0;
    double frac = pos - static_cast<double>(i);
    double raw = cum_[i] + frac * (cum_[i + 1] - cum_[i]);
    return raw / total_;
  }

  double quantile(double p) const {
    double a = lo_, b = hi_;
    for (int it = 0; it < 200 && b - a > 1e-13 * (hi_ - lo_); ++it) {
      double mid = 0.5 * (a + b);
      (cdf(mid) < p ? a : b) = mid;
    }
    return 0.5 * (a + b);
  }

 private:
  double lo_, hi_, step_, total_ = 0.0;
  std::vector<double> cum_;
};

// Integration window that captures all but ~1e-23 of a split normal's mass.
inline std::pair<double, double> sn_window(const SplitNormal& sn) {
  return {sn.mu - 10.0 * sn.sigma1, sn.mu + 10.0 * sn.sigma2};
}

inline TrapezoidCdf oracle_sn_cdf(const SplitNormal& sn,
                                  std::size_t cells = 400000) {
  auto [lo, hi] = sn_window(sn);
  return TrapezoidCdf([sn](double x) { return pdf(sn, x); }, lo, hi, cells);
}

// Central finite difference d f / d x at x.
inline double central_diff(const std::function<double(double)>& f, double x,
                           double eps = 1e-5) {
  return (f(x + eps) - f(x - eps)) / (2.0 * eps);
}

}  // namespace piqd::testing
