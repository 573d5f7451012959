#pragma once

// Training losses for interval-producing networks, each returning its value
// together with per-sample gradients with respect to the three prediction
// channels. Coverage uses a sigmoid-softened membership indicator so that the
// losses stay differentiable; widths are counted over captured samples only.

#include <span>
#include <vector>

#include "piqd/metrics.hpp"

namespace piqd {

struct LossParams {
  double alpha = 0.05;       // 1 - target coverage
  double lambda_qd = 0.05;   // coverage weight in the original objective
  double lambda1 = 0.975;    // coverage vs width trade-off in the composite
  double lambda2 = 0.05;     // point-error share in the composite
  double xi = 10.0;          // ordering-penalty weight
  double softness = 160.0;   // sigmoid sharpness for soft coverage
  // When true the composite's coverage term also gets the batch-size /
  // (alpha(1-alpha)) scaling of the original objective; off by default so
  // the lambda weights keep their plain convex-combination meaning.
  bool scale_coverage_term = false;

  // Throws std::domain_error on out-of-range values.
  void validate() const;
};

struct LossOutput {
  double value = 0.0;
  std::vector<double> d_lower;
  std::vector<double> d_point;
  std::vector<double> d_upper;
};

// Soft membership of y in [lower, upper]: sigmoid(s(y-lower))*sigmoid(s(upper-y)).
double soft_coverage(double lower, double y, double upper, double softness);

// Mean width over captured samples (hard indicator); the indicator and the
// capture count are treated as constants in the gradients. Zero captured
// samples give value 0 and zero gradients.
LossOutput loss_mpiw_captured(std::span<const IntervalPrediction> preds,
                              std::span<const double> ys);

// Squared coverage shortfall max(0, (1-alpha) - soft_picp)^2.
LossOutput loss_picp(std::span<const IntervalPrediction> preds,
                     std::span<const double> ys, double alpha,
                     double softness);

// Original quality-driven objective: captured width plus
// lambda_qd * n/(alpha(1-alpha)) * coverage shortfall, n the batch size.
LossOutput loss_qd(std::span<const IntervalPrediction> preds,
                   std::span<const double> ys, const LossParams& params);

// Mean squared point error.
LossOutput loss_mse(std::span<const IntervalPrediction> preds,
                    std::span<const double> ys);

// Ordering penalty: mean of max(0, lower-point) + max(0, point-upper).
// Activates strictly (subgradient 0 at the kink); needs no targets.
LossOutput loss_penalty(std::span<const IntervalPrediction> preds);

// Composite objective:
//   (1-lambda1)(1-lambda2) * width + lambda1(1-lambda2) * coverage
//   + lambda2 * mse + xi * penalty.
LossOutput loss_qd_plus(std::span<const IntervalPrediction> preds,
                        std::span<const double> ys, const LossParams& params);

}  // namespace piqd
