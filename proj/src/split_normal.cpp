#include "piqd/split_normal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "piqd/erf.hpp"

namespace piqd {

namespace {
constexpr double kSqrt2 = 1.41421356237309504880;
constexpr double kSqrt2OverPi = 0.79788456080286535588;  // sqrt(2/pi)
constexpr double kTwoOverSqrtPi = 1.12837916709551257390;

double clamp_to_open_unit(double v) {
  if (v >= 1.0) return std::nextafter(1.0, 0.0);
  if (v <= -1.0) return std::nextafter(-1.0, 0.0);
  return v;
}
}  // namespace

SplitNormal::SplitNormal(double mu_, double sigma1_, double sigma2_)
    : mu(mu_), sigma1(sigma1_), sigma2(sigma2_) {
  if (!std::isfinite(mu) || !std::isfinite(sigma1) || !std::isfinite(sigma2) ||
      sigma1 <= 0.0 || sigma2 <= 0.0)
    throw std::domain_error("SplitNormal: scales must be finite and positive");
}

double pdf(const SplitNormal& sn, double x) {
  double a = kSqrt2OverPi / (sn.sigma1 + sn.sigma2);
  double s = x < sn.mu ? sn.sigma1 : sn.sigma2;
  double z = (x - sn.mu) / s;
  return a * std::exp(-0.5 * z * z);
}

double cdf(const SplitNormal& sn, double x) {
  double s = x < sn.mu ? sn.sigma1 : sn.sigma2;
  double z = (x - sn.mu) / (kSqrt2 * s);
  return (sn.sigma1 + erf(z) * s) / (sn.sigma1 + sn.sigma2);
}

double quantile(const SplitNormal& sn, double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("quantile: p must lie in (0, 1)");
  double total = sn.sigma1 + sn.sigma2;
  double threshold = sn.sigma1 / total;  // cdf at the mode
  if (p < threshold) {
    double arg = clamp_to_open_unit(p * total / sn.sigma1 - 1.0);
    return sn.mu + kSqrt2 * sn.sigma1 * erf_inv(arg);
  }
  double arg = clamp_to_open_unit((p * total - sn.sigma1) / sn.sigma2);
  return sn.mu + kSqrt2 * sn.sigma2 * erf_inv(arg);
}

std::pair<double, double> analytic_init(double y_lower, double y_point,
                                        double y_upper, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::domain_error("analytic_init: alpha must lie in (0, 1)");
  if (!(y_lower < y_point && y_point < y_upper))
    throw std::invalid_argument(
        "analytic_init: requires y_lower < y_point < y_upper");
  double p_lo = alpha / 2.0;
  double p_hi = 1.0 - alpha / 2.0;
  // Pretend each half is a full Gaussian centered at y_point: pick the scale
  // whose p_lo (resp. p_hi) quantile lands on the interval edge.
  double sigma1 = (y_lower - y_point) / (kSqrt2 * erf_inv(2.0 * p_lo - 1.0));
  double sigma2 = (y_upper - y_point) / (kSqrt2 * erf_inv(2.0 * p_hi - 1.0));
  return {sigma1, sigma2};
}

namespace {

// cdf value and its partial derivatives with respect to the two scales.
struct CdfGrad {
  double value;
  double d_sigma1;
  double d_sigma2;
};

CdfGrad cdf_with_grad(const SplitNormal& sn, double x) {
  double total = sn.sigma1 + sn.sigma2;
  CdfGrad out{};
  if (x < sn.mu) {
    double z = (x - sn.mu) / (kSqrt2 * sn.sigma1);
    double e = erf(z);
    out.value = (sn.sigma1 + e * sn.sigma1) / total;
    // d/dsigma1 of sigma1*(1+erf(z)) is (1+erf(z)) + sigma1 * erf'(z) * dz,
    //   with dz/dsigma1 = -z/sigma1, so the second term is -z*(2/sqrt(pi))e^{-z^2}.
    double inner = (1.0 + e) - z * kTwoOverSqrtPi * std::exp(-z * z);
    out.d_sigma1 = inner / total - out.value / total;
    out.d_sigma2 = -out.value / total;
  } else {
    double z = (x - sn.mu) / (kSqrt2 * sn.sigma2);
    double e = erf(z);
    out.value = (sn.sigma1 + e * sn.sigma2) / total;
    out.d_sigma1 = (1.0 - out.value) / total;
    double inner = e - z * kTwoOverSqrtPi * std::exp(-z * z);
    out.d_sigma2 = inner / total - out.value / total;
  }
  return out;
}

}  // namespace

FitResult fit(double y_lower, double y_point, double y_upper, double alpha,
              const FitConfig& cfg) {
  if (cfg.max_iters < 1 || cfg.learning_rate <= 0.0 || cfg.tolerance < 0.0 ||
      cfg.positivity_floor <= 0.0)
    throw std::invalid_argument("fit: bad FitConfig");
  auto [s1, s2] = analytic_init(y_lower, y_point, y_upper, alpha);
  double p_lo = alpha / 2.0;
  double p_hi = 1.0 - alpha / 2.0;
  double floor_log = std::log(cfg.positivity_floor);
  double t1 = std::max(std::log(std::max(s1, cfg.positivity_floor)), floor_log);
  double t2 = std::max(std::log(std::max(s2, cfg.positivity_floor)), floor_log);

  // Loss and gradient at one iterate, shared by the descent loop below.
  auto eval = [&](double a1, double a2, double* g1, double* g2, double* rl,
                  double* ru) {
    double sig1 = std::exp(a1);
    double sig2 = std::exp(a2);
    SplitNormal sn(y_point, sig1, sig2);
    CdfGrad lo = cdf_with_grad(sn, y_lower);
    CdfGrad hi = cdf_with_grad(sn, y_upper);
    *rl = lo.value - p_lo;
    *ru = hi.value - p_hi;
    if (g1) {
      // Chain rule through theta = log(sigma): d/dtheta = sigma * d/dsigma.
      *g1 = 2.0 * (*rl * lo.d_sigma1 + *ru * hi.d_sigma1) * sig1;
      *g2 = 2.0 * (*rl * lo.d_sigma2 + *ru * hi.d_sigma2) * sig2;
    }
    return *rl * *rl + *ru * *ru;
  };

  double rl = 0.0, ru = 0.0, g1 = 0.0, g2 = 0.0;
  double loss = eval(t1, t2, &g1, &g2, &rl, &ru);
  double best_loss = loss;
  double best_t1 = t1, best_t2 = t2;
  double best_rl = rl, best_ru = ru;
  int iters = 0;
  bool converged = loss <= cfg.tolerance;

  // Gradient descent with a monotone adaptive step: the rate grows while
  // steps keep lowering the loss and backtracks when one overshoots, which
  // copes with the badly scaled gradients of strongly skewed triples.
  double rate = cfg.learning_rate;
  for (int it = 1; it <= cfg.max_iters && !converged; ++it) {
    iters = it;
    double n1 = 0.0, n2 = 0.0, trial = 0.0;
    double trial_rl = 0.0, trial_ru = 0.0;
    bool accepted = false;
    for (int back = 0; back < 60; ++back) {
      n1 = std::max(t1 - rate * g1, floor_log);
      n2 = std::max(t2 - rate * g2, floor_log);
      trial = eval(n1, n2, nullptr, nullptr, &trial_rl, &trial_ru);
      if (trial <= loss) {
        accepted = true;
        break;
      }
      rate *= 0.5;
    }
    if (!accepted) break;  // no descent direction left at any step size
    t1 = n1;
    t2 = n2;
    loss = eval(t1, t2, &g1, &g2, &rl, &ru);
    rate = std::min(rate * 1.25, 1e6);
    if (loss < best_loss) {
      best_loss = loss;
      best_t1 = t1;
      best_t2 = t2;
      best_rl = rl;
      best_ru = ru;
    }
    if (loss <= cfg.tolerance) converged = true;
  }

  FitResult out{SplitNormal(y_point, std::exp(best_t1), std::exp(best_t2)),
                best_loss, best_rl, best_ru, iters, converged};
  return out;
}

SplitNormalMixture::SplitNormalMixture(std::vector<SplitNormal> components)
    : components_(std::move(components)) {
  if (components_.empty())
    throw std::invalid_argument("SplitNormalMixture: needs >= 1 component");
}

double mixture_pdf(const SplitNormalMixture& mix, double x) {
  double sum = 0.0;
  for (const auto& c : mix.components()) sum += pdf(c, x);
  return sum / mix.size();
}

double mixture_cdf(const SplitNormalMixture& mix, double x) {
  double sum = 0.0;
  for (const auto& c : mix.components()) sum += cdf(c, x);
  return sum / mix.size();
}

double mixture_quantile(const SplitNormalMixture& mix, double p, double tol) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("mixture_quantile: p must lie in (0, 1)");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& c : mix.components()) {
    double q = quantile(c, p);
    lo = std::min(lo, q);
    hi = std::max(hi, q);
  }
  if (lo == hi) return lo;
  // Each component's cdf is >= p at its own p-quantile's right neighbours and
  // <= p to the left, so the mixture cdf brackets p on [lo, hi].
  if (mixture_cdf(mix, lo) > p + 1e-9 || mixture_cdf(mix, hi) < p - 1e-9)
    throw std::logic_error("mixture_quantile: bracket invariant violated");
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    double f = mixture_cdf(mix, mid);
    if (std::fabs(f - p) <= tol) return mid;
    if (f < p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= std::numeric_limits<double>::epsilon() *
                       (std::fabs(lo) + std::fabs(hi) + 1.0))
      break;
  }
  return mid;
}

}  // namespace piqd
