#include "piqd/mlp.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "piqd/dataset.hpp"
#include "piqd/rng.hpp"

namespace piqd {

namespace {
constexpr int kHeads = 3;  // upper, point, lower
constexpr std::uint64_t kShuffleSalt = 0x73687566666c65ull;

void check_arch(const MlpArch& a) {
  if (a.input_dim < 1 || a.hidden1 < 1 || a.hidden2 < 1)
    throw std::invalid_argument("MlpArch: all dimensions must be >= 1");
}
}  // namespace

Mlp::Mlp(const MlpArch& arch, std::uint64_t seed) : arch_(arch) {
  check_arch(arch);
  std::size_t d = arch.input_dim, h1 = arch.hidden1, h2 = arch.hidden2;
  w1_ = 0;
  b1_ = w1_ + h1 * d;
  w2_ = b1_ + h1;
  b2_ = w2_ + h2 * h1;
  w3_ = b2_ + h2;
  b3_ = w3_ + kHeads * h2;
  params_.assign(b3_ + kHeads, 0.0);

  Rng rng(seed);
  double s1 = std::sqrt(2.0 / static_cast<double>(d));
  for (std::size_t i = 0; i < h1 * d; ++i) params_[w1_ + i] = s1 * rng.normal();
  double s2 = std::sqrt(2.0 / static_cast<double>(h1));
  for (std::size_t i = 0; i < h2 * h1; ++i)
    params_[w2_ + i] = s2 * rng.normal();
  double s3 = std::sqrt(1.0 / static_cast<double>(h2));
  for (std::size_t i = 0; i < kHeads * h2; ++i)
    params_[w3_ + i] = s3 * rng.normal();
  // Bias the heads apart so an untrained net already outputs upper > lower.
  params_[b3_ + 0] = 2.0;
  params_[b3_ + 1] = 0.0;
  params_[b3_ + 2] = -2.0;
}

void Mlp::forward(std::span<const double> x, std::size_t n,
                  MlpWorkspace& ws) const {
  std::size_t d = arch_.input_dim, h1 = arch_.hidden1, h2 = arch_.hidden2;
  if (x.size() != n * d)
    throw std::invalid_argument("Mlp::forward: batch size mismatch");
  ws.n = n;
  ws.x.assign(x.begin(), x.end());
  ws.z1.resize(n * h1);
  ws.a1.resize(n * h1);
  ws.z2.resize(n * h2);
  ws.a2.resize(n * h2);
  ws.out.resize(n * kHeads);
  const double* w1 = params_.data() + w1_;
  const double* b1 = params_.data() + b1_;
  const double* w2 = params_.data() + w2_;
  const double* b2 = params_.data() + b2_;
  const double* w3 = params_.data() + w3_;
  const double* b3 = params_.data() + b3_;
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.data() + i * d;
    double* z1i = ws.z1.data() + i * h1;
    double* a1i = ws.a1.data() + i * h1;
    for (std::size_t j = 0; j < h1; ++j) {
      const double* wj = w1 + j * d;
      double acc = b1[j];
      for (std::size_t k = 0; k < d; ++k) acc += wj[k] * xi[k];
      z1i[j] = acc;
      a1i[j] = acc > 0.0 ? acc : 0.0;
    }
    double* z2i = ws.z2.data() + i * h2;
    double* a2i = ws.a2.data() + i * h2;
    for (std::size_t j = 0; j < h2; ++j) {
      const double* wj = w2 + j * h1;
      double acc = b2[j];
      for (std::size_t k = 0; k < h1; ++k) acc += wj[k] * a1i[k];
      z2i[j] = acc;
      a2i[j] = acc > 0.0 ? acc : 0.0;
    }
    double* oi = ws.out.data() + i * kHeads;
    for (int o = 0; o < kHeads; ++o) {
      const double* wo = w3 + static_cast<std::size_t>(o) * h2;
      double acc = b3[o];
      for (std::size_t k = 0; k < h2; ++k) acc += wo[k] * a2i[k];
      oi[o] = acc;
    }
  }
}

std::vector<IntervalPrediction> Mlp::outputs_to_predictions(
    const MlpWorkspace& ws) {
  std::vector<IntervalPrediction> preds(ws.n);
  for (std::size_t i = 0; i < ws.n; ++i) {
    const double* oi = ws.out.data() + i * kHeads;
    preds[i] = IntervalPrediction{oi[2], oi[1], oi[0]};
  }
  return preds;
}

std::vector<IntervalPrediction> Mlp::predict(std::span<const double> x,
                                             std::size_t n) const {
  MlpWorkspace ws;
  forward(x, n, ws);
  return outputs_to_predictions(ws);
}

void Mlp::backward(MlpWorkspace& ws, std::span<const double> d_lower,
                   std::span<const double> d_point,
                   std::span<const double> d_upper,
                   std::vector<double>& grad) const {
  std::size_t n = ws.n;
  std::size_t d = arch_.input_dim, h1 = arch_.hidden1, h2 = arch_.hidden2;
  if (d_lower.size() != n || d_point.size() != n || d_upper.size() != n)
    throw std::invalid_argument("Mlp::backward: gradient size mismatch");
  grad.assign(params_.size(), 0.0);
  auto& dout = ws.d_out;
  auto& da2 = ws.d_a2;
  auto& da1 = ws.d_a1;
  dout.resize(n * kHeads);
  da2.resize(n * h2);
  da1.resize(n * h1);
  for (std::size_t i = 0; i < n; ++i) {
    dout[i * kHeads + 0] = d_upper[i];
    dout[i * kHeads + 1] = d_point[i];
    dout[i * kHeads + 2] = d_lower[i];
  }
  const double* w2 = params_.data() + w2_;
  const double* w3 = params_.data() + w3_;
  double* gw1 = grad.data() + w1_;
  double* gb1 = grad.data() + b1_;
  double* gw2 = grad.data() + w2_;
  double* gb2 = grad.data() + b2_;
  double* gw3 = grad.data() + w3_;
  double* gb3 = grad.data() + b3_;
  for (std::size_t i = 0; i < n; ++i) {
    const double* a2i = ws.a2.data() + i * h2;
    const double* z2i = ws.z2.data() + i * h2;
    const double* a1i = ws.a1.data() + i * h1;
    const double* z1i = ws.z1.data() + i * h1;
    const double* xi = ws.x.data() + i * d;
    const double* doi = dout.data() + i * kHeads;
    double* da2i = da2.data() + i * h2;
    double* da1i = da1.data() + i * h1;

    for (std::size_t k = 0; k < h2; ++k) da2i[k] = 0.0;
    for (int o = 0; o < kHeads; ++o) {
      double g = doi[o];
      if (g == 0.0) continue;
      const double* wo = w3 + static_cast<std::size_t>(o) * h2;
      double* gwo = gw3 + static_cast<std::size_t>(o) * h2;
      for (std::size_t k = 0; k < h2; ++k) {
        gwo[k] += g * a2i[k];
        da2i[k] += g * wo[k];
      }
      gb3[o] += g;
    }
    // ReLU: strict z > 0 passes gradient, the kink itself passes none.
    for (std::size_t j = 0; j < h1; ++j) da1i[j] = 0.0;
    for (std::size_t j = 0; j < h2; ++j) {
      if (z2i[j] <= 0.0) continue;
      double g = da2i[j];
      if (g == 0.0) continue;
      const double* wj = w2 + j * h1;
      double* gwj = gw2 + j * h1;
      for (std::size_t k = 0; k < h1; ++k) {
        gwj[k] += g * a1i[k];
        da1i[k] += g * wj[k];
      }
      gb2[j] += g;
    }
    for (std::size_t j = 0; j < h1; ++j) {
      if (z1i[j] <= 0.0) continue;
      double g = da1i[j];
      if (g == 0.0) continue;
      double* gwj = gw1 + j * d;
      for (std::size_t k = 0; k < d; ++k) gwj[k] += g * xi[k];
      gb1[j] += g;
    }
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0))
    throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  if (!(decay_rate > 0.0 && decay_rate <= 1.0))
    throw std::invalid_argument("TrainConfig: decay_rate must lie in (0, 1]");
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (batch_size < 1)
    throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  loss_params.validate();
}

namespace {

LossOutput dispatch_loss(LossKind kind,
                         std::span<const IntervalPrediction> preds,
                         std::span<const double> ys, const LossParams& lp) {
  switch (kind) {
    case LossKind::kQdPlus:
      return loss_qd_plus(preds, ys, lp);
    case LossKind::kQd:
      return loss_qd(preds, ys, lp);
    case LossKind::kMseOnly:
      return loss_mse(preds, ys);
  }
  throw std::logic_error("dispatch_loss: unknown kind");
}

}  // namespace

TrainResult train(Mlp& model, const DataView& train_data,
                  const std::optional<DataView>& val_data,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (train_data.n == 0)
    throw std::invalid_argument("train: empty training set");
  if (train_data.x.size() != train_data.n * train_data.d ||
      train_data.y.size() != train_data.n)
    throw std::invalid_argument("train: inconsistent training view");

  TrainResult result;
  result.trace.reserve(cfg.epochs);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  Rng shuffle_rng(derive_seed(cfg.seed, kShuffleSalt));
  std::vector<std::size_t> order(train_data.n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::size_t d = train_data.d;
  std::size_t bcap = std::min<std::size_t>(cfg.batch_size, train_data.n);
  std::vector<double> xb(bcap * d), yb(bcap);
  MlpWorkspace ws;
  std::vector<double> grad;
  std::vector<double> adam_m(model.parameter_count(), 0.0);
  std::vector<double> adam_v(model.parameter_count(), 0.0);
  long step = 0;
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

  double lr = cfg.learning_rate;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    long batches = 0;
    for (std::size_t start = 0; start < train_data.n; start += bcap) {
      std::size_t bn = std::min(bcap, train_data.n - start);
      for (std::size_t i = 0; i < bn; ++i) {
        std::size_t src = order[start + i];
        std::copy_n(train_data.x.data() + src * d, d, xb.data() + i * d);
        yb[i] = train_data.y[src];
      }
      model.forward(std::span<const double>(xb.data(), bn * d), bn, ws);
      auto preds = Mlp::outputs_to_predictions(ws);
      LossOutput lo = dispatch_loss(cfg.loss, preds,
                                    std::span<const double>(yb.data(), bn),
                                    cfg.loss_params);
      if (!std::isfinite(lo.value)) {
        result.failed = true;
        result.failure_reason = "non-finite loss at epoch " +
                                std::to_string(epoch) + " batch " +
                                std::to_string(batches);
        return result;
      }
      epoch_loss += lo.value;
      ++batches;
      model.backward(ws, lo.d_lower, lo.d_point, lo.d_upper, grad);
      ++step;
      double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      auto params = model.parameters();
      for (std::size_t p = 0; p < params.size(); ++p) {
        double g = grad[p];
        adam_m[p] = kBeta1 * adam_m[p] + (1.0 - kBeta1) * g;
        adam_v[p] = kBeta2 * adam_v[p] + (1.0 - kBeta2) * g * g;
        double mhat = adam_m[p] / c1;
        double vhat = adam_v[p] / c2;
        params[p] -= lr * mhat / (std::sqrt(vhat) + kEps);
      }
    }
    EpochStats es;
    es.loss = epoch_loss / static_cast<double>(batches);
    es.val_picp = es.val_mpiw = es.val_mse = nan;
    if (val_data && val_data->n > 0) {
      auto vp = model.predict(val_data->x, val_data->n);
      es.val_picp = picp(vp, val_data->y);
      es.val_mpiw = mpiw(vp);
      std::vector<double> pts(vp.size());
      for (std::size_t i = 0; i < vp.size(); ++i) pts[i] = vp[i].point;
      es.val_mse = mse(pts, val_data->y);
    }
    result.trace.push_back(es);
    lr *= cfg.decay_rate;
  }

  auto train_preds = model.predict(train_data.x, train_data.n);
  result.final_train_picp = picp(train_preds, train_data.y);
  IntegrityCounts ic = integrity_violations(train_preds);
  result.final_crossing_fraction =
      static_cast<double>(ic.crossings) / static_cast<double>(train_data.n);
  if (cfg.loss != LossKind::kMseOnly) {
    if (result.final_train_picp < 0.5) {
      result.failed = true;
      result.failure_reason = "final training PICP " +
                              std::to_string(result.final_train_picp) +
                              " below 0.5";
    } else if (result.final_crossing_fraction > 0.01) {
      result.failed = true;
      result.failure_reason =
          "crossed intervals on " +
          std::to_string(result.final_crossing_fraction * 100.0) +
          "% of training samples (limit 1%)";
    }
  }
  return result;
}

void save_model(const Mlp& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_model: cannot open " + path);
  const MlpArch& a = model.arch();
  out << "piqd-mlp v1\n";
  out << "arch " << a.input_dim << ' ' << a.hidden1 << ' ' << a.hidden2 << ' '
      << kHeads << '\n';
  out << "heads upper point lower\n";
  out << "params " << model.parameter_count() << '\n';
  char buf[64];
  for (double v : model.parameters()) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf << '\n';
  }
  if (!out) throw IoError("save_model: write failed for " + path);
}

Mlp load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_model: cannot open " + path);
  std::string magic, version;
  in >> magic >> version;
  if (magic != "piqd-mlp" || version != "v1")
    throw ParseError("load_model: bad header in " + path);
  std::string tag;
  MlpArch arch;
  int heads = 0;
  in >> tag >> arch.input_dim >> arch.hidden1 >> arch.hidden2 >> heads;
  if (tag != "arch" || heads != kHeads)
    throw ParseError("load_model: bad arch line in " + path);
  std::string h, h0, h1n, h2n;
  in >> h >> h0 >> h1n >> h2n;
  if (h != "heads" || h0 != "upper" || h1n != "point" || h2n != "lower")
    throw ParseError("load_model: bad heads line in " + path);
  std::size_t count = 0;
  in >> tag >> count;
  if (tag != "params")
    throw ParseError("load_model: bad params line in " + path);
  Mlp model(arch, 0);
  if (count != model.parameter_count())
    throw ParseError("load_model: parameter count mismatch in " + path);
  auto params = model.parameters();
  for (std::size_t i = 0; i < count; ++i) {
    if (!(in >> params[i]))
      throw ParseError("load_model: truncated parameters in " + path);
  }
  return model;
}

}  // namespace piqd
