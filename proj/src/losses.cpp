#include "piqd/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace piqd {

namespace {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

void check_batch(std::size_t a, std::size_t b, const char* who) {
  if (a == 0) throw std::invalid_argument(std::string(who) + ": empty batch");
  if (a != b)
    throw std::invalid_argument(std::string(who) + ": size mismatch");
}

LossOutput zeros(std::size_t n) {
  LossOutput out;
  out.d_lower.assign(n, 0.0);
  out.d_point.assign(n, 0.0);
  out.d_upper.assign(n, 0.0);
  return out;
}

}  // namespace

void LossParams::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::domain_error("LossParams: alpha must lie in (0, 1)");
  if (lambda_qd < 0.0)
    throw std::domain_error("LossParams: lambda_qd must be >= 0");
  // The weight grids probe the borders 0 and 1, where individual terms
  // switch off, so both are allowed here.
  if (!(lambda1 >= 0.0 && lambda1 <= 1.0))
    throw std::domain_error("LossParams: lambda1 must lie in [0, 1]");
  if (!(lambda2 >= 0.0 && lambda2 <= 1.0))
    throw std::domain_error("LossParams: lambda2 must lie in [0, 1]");
  if (xi < 0.0) throw std::domain_error("LossParams: xi must be >= 0");
  if (!(softness > 0.0))
    throw std::domain_error("LossParams: softness must be > 0");
}

double soft_coverage(double lower, double y, double upper, double softness) {
  return sigmoid(softness * (y - lower)) * sigmoid(softness * (upper - y));
}

LossOutput loss_mpiw_captured(std::span<const IntervalPrediction> preds,
                              std::span<const double> ys) {
  check_batch(preds.size(), ys.size(), "loss_mpiw_captured");
  std::size_t n = preds.size();
  LossOutput out = zeros(n);
  std::vector<int> captured(n);
  long c = 0;
  for (std::size_t i = 0; i < n; ++i) {
    captured[i] = coverage_indicator(preds[i], ys[i]);
    c += captured[i];
  }
  if (c == 0) return out;
  double inv_c = 1.0 / static_cast<double>(c);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!captured[i]) continue;
    sum += preds[i].upper - preds[i].lower;
    // Indicator and count held fixed: width flows straight through.
    out.d_upper[i] = inv_c;
    out.d_lower[i] = -inv_c;
  }
  out.value = sum * inv_c;
  return out;
}

LossOutput loss_picp(std::span<const IntervalPrediction> preds,
                     std::span<const double> ys, double alpha,
                     double softness) {
  check_batch(preds.size(), ys.size(), "loss_picp");
  std::size_t n = preds.size();
  LossOutput out = zeros(n);
  double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> sig_lo(n), sig_hi(n);
  double soft_picp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sig_lo[i] = sigmoid(softness * (ys[i] - preds[i].lower));
    sig_hi[i] = sigmoid(softness * (preds[i].upper - ys[i]));
    soft_picp += sig_lo[i] * sig_hi[i];
  }
  soft_picp *= inv_n;
  double shortfall = (1.0 - alpha) - soft_picp;
  if (shortfall <= 0.0) return out;  // kink takes subgradient 0
  out.value = shortfall * shortfall;
  double d_soft = -2.0 * shortfall * inv_n;  // dL/d(k_i)
  for (std::size_t i = 0; i < n; ++i) {
    double dk_dlower = -softness * sig_lo[i] * (1.0 - sig_lo[i]) * sig_hi[i];
    double dk_dupper = softness * sig_lo[i] * sig_hi[i] * (1.0 - sig_hi[i]);
    out.d_lower[i] = d_soft * dk_dlower;
    out.d_upper[i] = d_soft * dk_dupper;
  }
  return out;
}

LossOutput loss_qd(std::span<const IntervalPrediction> preds,
                   std::span<const double> ys, const LossParams& params) {
  params.validate();
  std::size_t n = preds.size();
  LossOutput width = loss_mpiw_captured(preds, ys);
  LossOutput cover = loss_picp(preds, ys, params.alpha, params.softness);
  double scale = params.lambda_qd * static_cast<double>(n) /
                 (params.alpha * (1.0 - params.alpha));
  LossOutput out = zeros(n);
  out.value = width.value + scale * cover.value;
  for (std::size_t i = 0; i < n; ++i) {
    out.d_lower[i] = width.d_lower[i] + scale * cover.d_lower[i];
    out.d_upper[i] = width.d_upper[i] + scale * cover.d_upper[i];
  }
  return out;
}

LossOutput loss_mse(std::span<const IntervalPrediction> preds,
                    std::span<const double> ys) {
  check_batch(preds.size(), ys.size(), "loss_mse");
  std::size_t n = preds.size();
  LossOutput out = zeros(n);
  double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = preds[i].point - ys[i];
    out.value += d * d * inv_n;
    out.d_point[i] = 2.0 * d * inv_n;
  }
  return out;
}

LossOutput loss_penalty(std::span<const IntervalPrediction> preds) {
  if (preds.empty()) throw std::invalid_argument("loss_penalty: empty batch");
  std::size_t n = preds.size();
  LossOutput out = zeros(n);
  double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double below = preds[i].lower - preds[i].point;
    if (below > 0.0) {  // strict: the kink itself contributes nothing
      out.value += below * inv_n;
      out.d_lower[i] += inv_n;
      out.d_point[i] -= inv_n;
    }
    double above = preds[i].point - preds[i].upper;
    if (above > 0.0) {
      out.value += above * inv_n;
      out.d_point[i] += inv_n;
      out.d_upper[i] -= inv_n;
    }
  }
  return out;
}

LossOutput loss_qd_plus(std::span<const IntervalPrediction> preds,
                        std::span<const double> ys, const LossParams& params) {
  params.validate();
  std::size_t n = preds.size();
  LossOutput width = loss_mpiw_captured(preds, ys);
  LossOutput cover = loss_picp(preds, ys, params.alpha, params.softness);
  LossOutput point = loss_mse(preds, ys);
  LossOutput pen = loss_penalty(preds);
  double w_width = (1.0 - params.lambda1) * (1.0 - params.lambda2);
  double w_cover = params.lambda1 * (1.0 - params.lambda2);
  if (params.scale_coverage_term)
    w_cover *= static_cast<double>(n) / (params.alpha * (1.0 - params.alpha));
  double w_point = params.lambda2;
  LossOutput out = zeros(n);
  out.value = w_width * width.value + w_cover * cover.value +
              w_point * point.value + params.xi * pen.value;
  for (std::size_t i = 0; i < n; ++i) {
    out.d_lower[i] = w_width * width.d_lower[i] + w_cover * cover.d_lower[i] +
                     params.xi * pen.d_lower[i];
    out.d_point[i] = w_point * point.d_point[i] + params.xi * pen.d_point[i];
    out.d_upper[i] = w_width * width.d_upper[i] + w_cover * cover.d_upper[i] +
                     params.xi * pen.d_upper[i];
  }
  return out;
}

}  // namespace piqd
