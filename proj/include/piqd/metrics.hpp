#pragma once

// Interval-prediction quality measures: coverage (PICP), width (MPIW, NMPIW),
// point error (MSE) and structural integrity counts.

#include <cstddef>
#include <span>
#include <vector>

namespace piqd {

struct IntervalPrediction {
  double lower;
  double point;
  double upper;
};

// True when lower <= point <= upper.
bool integrity_ok(const IntervalPrediction& p);

// 1 if lower <= y <= upper else 0 (inclusive ends).
int coverage_indicator(const IntervalPrediction& p, double y);

// Fraction of targets covered. Throws std::invalid_argument on empty input or
// size mismatch.
double picp(std::span<const IntervalPrediction> preds,
            std::span<const double> ys);

// Mean of (upper - lower). Throws std::invalid_argument on empty input.
double mpiw(std::span<const IntervalPrediction> preds);

// Width normalised by the target range. Throws std::domain_error unless
// target_range > 0.
double nmpiw(double mpiw_value, double target_range);

// Mean squared error of the point estimates.
double mse(std::span<const double> points, std::span<const double> ys);

struct IntegrityCounts {
  long crossings = 0;      // upper < lower
  long point_outside = 0;  // point not in [min(lower,upper), max(lower,upper)]
};

IntegrityCounts integrity_violations(std::span<const IntervalPrediction> preds);

struct EvalReport {
  double picp = 0.0;
  double mpiw = 0.0;
  double nmpiw = 0.0;
  double mse = 0.0;
  long n = 0;
  long crossings = 0;
  long point_outside = 0;
  double target_range = 0.0;

  long integrity_violation_count() const { return crossings + point_outside; }
};

// Full report over a batch. target_range > 0 is used for NMPIW.
EvalReport evaluate(std::span<const IntervalPrediction> preds,
                    std::span<const double> ys, double target_range);

// Point-only report (interval metrics set to NaN), for models that produce no
// intervals.
EvalReport evaluate_points(std::span<const double> points,
                           std::span<const double> ys);

}  // namespace piqd
