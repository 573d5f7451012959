#pragma once

// Fully connected network with two ReLU hidden layers and three linear output
// heads (upper bound, point estimate, lower bound in that order internally;
// the public API always speaks IntervalPrediction). Forward, backward and the
// Adam training loop are hand-written so that runs are bit-reproducible.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "piqd/losses.hpp"
#include "piqd/metrics.hpp"

namespace piqd {

struct MlpArch {
  int input_dim = 1;
  int hidden1 = 50;
  int hidden2 = 50;
};

// Scratch buffers for a forward/backward pass; reuse across batches to avoid
// churn.
struct MlpWorkspace {
  std::size_t n = 0;
  std::vector<double> x;        // n x d copy of the batch
  std::vector<double> z1, a1;   // n x h1
  std::vector<double> z2, a2;   // n x h2
  std::vector<double> out;      // n x 3, head order upper/point/lower
  std::vector<double> d_out, d_a2, d_a1;  // backward scratch
};

class Mlp {
 public:
  // Random init: He for hidden layers, variance 1/fan_in for the output
  // layer, output biases (+2, 0, -2) so fresh nets emit ordered intervals.
  Mlp(const MlpArch& arch, std::uint64_t seed);

  const MlpArch& arch() const { return arch_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  // x is row-major n x input_dim.
  std::vector<IntervalPrediction> predict(std::span<const double> x,
                                          std::size_t n) const;

  // Forward pass keeping activations for backward().
  void forward(std::span<const double> x, std::size_t n,
               MlpWorkspace& ws) const;
  static std::vector<IntervalPrediction> outputs_to_predictions(
      const MlpWorkspace& ws);

  // Accumulates dLoss/dParams into grad (size parameter_count, zeroed here)
  // from per-sample gradients on the three prediction channels.
  void backward(MlpWorkspace& ws, std::span<const double> d_lower,
                std::span<const double> d_point,
                std::span<const double> d_upper,
                std::vector<double>& grad) const;

 private:
  MlpArch arch_;
  std::vector<double> params_;
  // Offsets into params_: w1 (h1 x d), b1, w2 (h2 x h1), b2, w3 (3 x h2), b3.
  std::size_t w1_, b1_, w2_, b2_, w3_, b3_;
};

enum class LossKind { kQdPlus, kQd, kMseOnly };

struct TrainConfig {
  double learning_rate = 0.02;
  double decay_rate = 1.0;  // multiplicative per epoch
  int epochs = 300;
  int batch_size = 100;
  std::uint64_t seed = 1;
  LossKind loss = LossKind::kQdPlus;
  LossParams loss_params;

  void validate() const;  // throws std::invalid_argument
};

// Borrowed view of a standardized supervised batch; x is row-major n x d.
struct DataView {
  std::span<const double> x;
  std::span<const double> y;
  std::size_t n = 0;
  std::size_t d = 0;
};

struct EpochStats {
  double loss = 0.0;  // mean over batches
  double val_picp = 0.0, val_mpiw = 0.0, val_mse = 0.0;  // NaN without val set
};

struct TrainResult {
  bool failed = false;
  std::string failure_reason;
  double final_train_picp = 0.0;
  double final_crossing_fraction = 0.0;
  std::vector<EpochStats> trace;
};

// Minibatch Adam on the given network. Failure (reported, not thrown): a
// non-finite loss at any step, or for interval losses a final training PICP
// below 0.5 or more than 1% crossed intervals.
TrainResult train(Mlp& model, const DataView& train_data,
                  const std::optional<DataView>& val_data,
                  const TrainConfig& cfg);

// Plain-text checkpoint, exact round trip (17 significant digits).
void save_model(const Mlp& model, const std::string& path);
Mlp load_model(const std::string& path);

}  // namespace piqd
