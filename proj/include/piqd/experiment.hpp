#pragma once

// The evaluation protocol: repeated shuffled train/test trials, each training
// one ensemble and scoring one or more aggregation modes on the held-out
// part; random hyper-parameter search scored on validation folds; and a
// weight-sensitivity sweep. All metrics are computed in the standardized
// coordinates of the full dataset so that runs are comparable, while models
// train in the coordinates of their own training split.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "piqd/dataset.hpp"
#include "piqd/ensemble.hpp"

namespace piqd {

enum class ModelKind { kQdPlus, kQd, kMseOnly };

const char* to_string(ModelKind m);
ModelKind model_kind_from_string(const std::string& s);

// The loss each model kind trains under, and how its point estimate is read
// out (losses that never touch the point head report interval midpoints).
LossKind loss_for(ModelKind m);
PointPolicy policy_for(ModelKind m);

struct TrialProtocol {
  int trials = 20;
  double test_fraction = 0.1;
  std::uint64_t master_seed = 1;
};

struct ExperimentConfig {
  ModelKind model = ModelKind::kQdPlus;
  EnsembleConfig ensemble;  // arch.input_dim is overwritten from the data
  TrialProtocol protocol;
  std::vector<Aggregation> aggregations{Aggregation::kSnm};
  bool member_level_eval = false;  // also report per-member metrics, averaged
  int workers = 1;
};

struct TrialOutcome {
  int trial = 0;
  bool failed = false;
  std::string failure_reason;
  int retries = 0;
  long snm_skipped = 0;
  long sem_clamped = 0;
  long fallback_samples = 0;
  std::vector<EvalReport> by_aggregation;  // parallel to aggregations
  EvalReport member_level;                 // if member_level_eval
};

struct MetricSummary {
  double mean = 0.0;
  double sem = 0.0;  // sample std / sqrt(trials); NaN for a single trial
};

struct SummaryRow {
  MetricSummary picp, mpiw, nmpiw, mse;
};

struct ExperimentResult {
  std::string dataset_name;
  ModelKind model = ModelKind::kQdPlus;
  std::vector<Aggregation> aggregations;
  bool member_level_eval = false;
  int trials_requested = 0;
  int trials_failed = 0;
  long total_retries = 0;
  double target_range = 0.0;  // full-scope standardized target range
  std::vector<TrialOutcome> trials;
  std::vector<SummaryRow> summary;  // parallel to aggregations
  SummaryRow member_level_summary;
};

// Runs the full protocol. Trials whose ensemble exhausts its retries are
// recorded as failed and excluded from the summary means. Trials run in
// parallel under cfg.workers with identical results for any worker count.
ExperimentResult run_experiment(const Dataset& raw,
                                const ExperimentConfig& cfg);

// ---- hyper-parameter search ----

struct HpsRange {
  double lo = 0.0, hi = 0.0;
};

struct HpsSpace {
  HpsRange learning_rate{1e-3, 0.1};  // sampled log-uniformly
  HpsRange decay_rate{0.99, 1.0};
  HpsRange lambda1{0.6, 0.995};
  HpsRange lambda2{0.01, 0.5};
  int epochs_lo = 100, epochs_hi = 500;
  int samples = 40;  // hard budget: at most 300

  void validate() const;
};

struct HpsCandidate {
  int index = 0;  // sampling order
  double learning_rate = 0.0, decay_rate = 1.0;
  double lambda1 = 0.0, lambda2 = 0.0;
  int epochs = 0;
  double mean_picp = 0.0, mean_mpiw = 0.0, mean_mse = 0.0;
  int failed_folds = 0;
};

// Selection: among candidates with no failed folds whose mean PICP sits
// within 0.01 of the coverage target, the narrowest (MPIW, then MSE) wins;
// if the band is empty the highest PICP wins. Remaining ties fall back to
// sampling order. Candidates with failed folds always rank behind clean
// ones. Returns the index into `candidates` of the winner.
std::size_t select_best(std::span<const HpsCandidate> candidates,
                        double coverage_target);

struct HpsResult {
  std::vector<HpsCandidate> ranked;  // best first
  HpsCandidate best;
};

// Scores `space.samples` random configurations with single networks on five
// 90/10 validation folds of the given data (normally the training part of a
// trial split, never test data). Deterministic for a fixed seed.
HpsResult run_hps(const Dataset& raw, const HpsSpace& space,
                  const ExperimentConfig& base, std::uint64_t seed);

// Writes a candidate's sampled values into an experiment configuration.
void apply_candidate(ExperimentConfig& cfg, const HpsCandidate& c);

// ---- weight sensitivity ----

struct SensitivityCell {
  double lambda1 = 0.0, lambda2 = 0.0, xi = 0.0;
  bool failed = false;
  double picp = 0.0, nmpiw = 0.0, mse = 0.0;
};

// One single-network run per (lambda1, lambda2, xi) cell on a shared 90/10
// split, reported on the held-out part. Cells with equal (lambda1, lambda2)
// share their seed across xi values so penalty settings compare like for
// like. Cell order: xi-major, then lambda1, then lambda2.
std::vector<SensitivityCell> run_sensitivity(
    const Dataset& raw, std::span<const double> lambda1_grid,
    std::span<const double> lambda2_grid, std::span<const double> xi_values,
    const ExperimentConfig& base);

// ---- built-in sinusoid benchmark ----

inline constexpr std::size_t kSinusoidSamples = 600;
inline constexpr std::uint64_t kSinusoidDataSeed = 7;

// Training settings tuned so the composite-loss ensemble reaches its nominal
// coverage on make_sinusoid(kSinusoidSamples, kSinusoidDataSeed).
ExperimentConfig sinusoid_experiment_config();

}  // namespace piqd
