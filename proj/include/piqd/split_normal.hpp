#pragma once

// Split normal (two-piece Gaussian) distribution: a Gaussian with separate
// scales sigma1 below the mode and sigma2 above it, glued continuously at mu.
// Used to turn an interval prediction (lower, point, upper) into a full
// distribution whose quantiles reproduce the interval, plus equal-weight
// mixtures of such distributions for ensemble aggregation.

#include <utility>
#include <vector>

namespace piqd {

struct SplitNormal {
  double mu;
  double sigma1;  // scale left of the mode
  double sigma2;  // scale right of the mode

  // Throws std::domain_error unless both scales are finite and > 0.
  SplitNormal(double mu, double sigma1, double sigma2);
};

double pdf(const SplitNormal& sn, double x);
double cdf(const SplitNormal& sn, double x);

// Closed-form inverse CDF. Throws std::domain_error unless 0 < p < 1.
double quantile(const SplitNormal& sn, double p);

struct FitConfig {
  int max_iters = 2000;
  double learning_rate = 0.1;     // step size on log-scales
  double tolerance = 1e-12;       // stop when the squared-residual loss dips below
  double positivity_floor = 1e-6; // hard lower bound for both scales
};

struct FitResult {
  SplitNormal sn;
  double loss;            // (cdf(lower)-alpha/2)^2 + (cdf(upper)-(1-alpha/2))^2
  double residual_lower;  // cdf(lower) - alpha/2
  double residual_upper;  // cdf(upper) - (1-alpha/2)
  int iterations;
  bool converged;         // loss <= tolerance
};

// Closed-form scales that make a split normal centered at y_point put mass
// alpha/2 below y_lower and alpha/2 above y_upper. Returns {sigma1, sigma2}.
std::pair<double, double> analytic_init(double y_lower, double y_point,
                                        double y_upper, double alpha);

// Fits mu = y_point and gradient-descends the two scales (in log space, so
// they stay positive) on the squared quantile-coverage residuals, starting
// from analytic_init. Requires y_lower < y_point < y_upper and 0 < alpha < 1.
FitResult fit(double y_lower, double y_point, double y_upper, double alpha,
              const FitConfig& cfg = {});

// Equal-weight mixture of split normals.
class SplitNormalMixture {
 public:
  // Throws std::invalid_argument if empty.
  explicit SplitNormalMixture(std::vector<SplitNormal> components);

  const std::vector<SplitNormal>& components() const { return components_; }
  int size() const { return static_cast<int>(components_.size()); }

 private:
  std::vector<SplitNormal> components_;
};

double mixture_pdf(const SplitNormalMixture& mix, double x);
double mixture_cdf(const SplitNormalMixture& mix, double x);

// Inverse mixture CDF by bisection. The bracket [min_j q_j(p), max_j q_j(p)]
// is guaranteed to contain the answer. Throws std::domain_error unless
// 0 < p < 1.
double mixture_quantile(const SplitNormalMixture& mix, double p,
                        double tol = 1e-10);

}  // namespace piqd
