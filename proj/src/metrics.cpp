#include "piqd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace piqd {

bool integrity_ok(const IntervalPrediction& p) {
  return p.lower <= p.point && p.point <= p.upper;
}

int coverage_indicator(const IntervalPrediction& p, double y) {
  return (p.lower <= y && y <= p.upper) ? 1 : 0;
}

namespace {
void check_pair(std::size_t a, std::size_t b, const char* who) {
  if (a == 0) throw std::invalid_argument(std::string(who) + ": empty batch");
  if (a != b)
    throw std::invalid_argument(std::string(who) + ": size mismatch");
}
}  // namespace

double picp(std::span<const IntervalPrediction> preds,
            std::span<const double> ys) {
  check_pair(preds.size(), ys.size(), "picp");
  long covered = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    covered += coverage_indicator(preds[i], ys[i]);
  return static_cast<double>(covered) / static_cast<double>(preds.size());
}

double mpiw(std::span<const IntervalPrediction> preds) {
  if (preds.empty()) throw std::invalid_argument("mpiw: empty batch");
  double sum = 0.0;
  for (const auto& p : preds) sum += p.upper - p.lower;
  return sum / static_cast<double>(preds.size());
}

double nmpiw(double mpiw_value, double target_range) {
  if (!(target_range > 0.0))
    throw std::domain_error("nmpiw: target range must be positive");
  return mpiw_value / target_range;
}

double mse(std::span<const double> points, std::span<const double> ys) {
  check_pair(points.size(), ys.size(), "mse");
  double sum = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    double d = points[i] - ys[i];
    sum += d * d;
  }
  return sum / static_cast<double>(points.size());
}

IntegrityCounts integrity_violations(
    std::span<const IntervalPrediction> preds) {
  IntegrityCounts out;
  for (const auto& p : preds) {
    if (p.upper < p.lower) ++out.crossings;
    double lo = std::min(p.lower, p.upper);
    double hi = std::max(p.lower, p.upper);
    if (p.point < lo || p.point > hi) ++out.point_outside;
  }
  return out;
}

EvalReport evaluate(std::span<const IntervalPrediction> preds,
                    std::span<const double> ys, double target_range) {
  check_pair(preds.size(), ys.size(), "evaluate");
  EvalReport r;
  r.n = static_cast<long>(preds.size());
  r.picp = picp(preds, ys);
  r.mpiw = mpiw(preds);
  r.target_range = target_range;
  r.nmpiw = nmpiw(r.mpiw, target_range);
  std::vector<double> points(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) points[i] = preds[i].point;
  r.mse = mse(points, ys);
  IntegrityCounts ic = integrity_violations(preds);
  r.crossings = ic.crossings;
  r.point_outside = ic.point_outside;
  return r;
}

EvalReport evaluate_points(std::span<const double> points,
                           std::span<const double> ys) {
  check_pair(points.size(), ys.size(), "evaluate_points");
  EvalReport r;
  r.n = static_cast<long>(points.size());
  double nan = std::numeric_limits<double>::quiet_NaN();
  r.picp = nan;
  r.mpiw = nan;
  r.nmpiw = nan;
  r.target_range = nan;
  r.mse = mse(points, ys);
  return r;
}

}  // namespace piqd
