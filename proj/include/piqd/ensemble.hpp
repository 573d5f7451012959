#pragma once

// Ensembles of interval networks. Members train independently from derived
// seeds (failed members retry with fresh seeds up to a limit). Per-sample
// member triples are combined either through a split-normal mixture (fit one
// split normal per member, mix with equal weights, read the final interval
// off the mixture quantiles) or through the standard-error baseline (Gaussian
// confidence band around the member means of each bound).

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "piqd/dataset.hpp"
#include "piqd/mlp.hpp"
#include "piqd/split_normal.hpp"

namespace piqd {

enum class Aggregation { kSnm, kSem, kSemPop, kNone };

// What the aggregate's point estimate is made of: the mean of the member
// point heads, or interval midpoints (for losses that never train the point
// head, where the midpoint is the better summary).
enum class PointPolicy { kHeadMean, kMidpoint };

const char* to_string(Aggregation a);
const char* to_string(PointPolicy p);
Aggregation aggregation_from_string(const std::string& s);
PointPolicy point_policy_from_string(const std::string& s);

struct EnsembleConfig {
  int members = 5;
  int retry_limit = 3;  // extra attempts per member after the first
  MlpArch arch;
  TrainConfig train;  // train.seed acts as the ensemble master seed
  PointPolicy point_policy = PointPolicy::kHeadMean;
  FitConfig fit;  // split-normal fit settings for SNM

  void validate() const;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RetryStats {
  int total_retries = 0;
  std::vector<int> attempts_per_member;  // 1 = clean first attempt
};

struct Ensemble {
  std::vector<Mlp> members;
  std::vector<std::uint64_t> seeds;  // the seed each member trained with
  int size() const { return static_cast<int>(members.size()); }
};

// Trains cfg.members networks; members run in parallel when workers > 1 and
// their retries stay sequential inside each slot, so results do not depend
// on the worker count. Throws TrainingError once any member exhausts
// 1 + retry_limit attempts.
Ensemble train_ensemble(const DataView& train_data, const EnsembleConfig& cfg,
                        RetryStats* stats = nullptr, int workers = 1);

// Member outputs for n samples: sample-major, preds[i * m + j] is member j's
// triple for sample i. The point policy is already applied.
struct MemberOutputs {
  std::size_t n = 0;
  int m = 0;
  std::vector<IntervalPrediction> preds;

  std::span<const IntervalPrediction> row(std::size_t i) const {
    return {preds.data() + i * m, static_cast<std::size_t>(m)};
  }
};

MemberOutputs member_predict(const Ensemble& ens, std::span<const double> x,
                             std::size_t n, PointPolicy policy);

// Bookkeeping for one aggregated sample.
struct AggregateNotes {
  int skipped_members = 0;   // non-ordered triples left out of the mixture
  int clamped_points = 0;    // member points clamped into their own interval
  bool fallback = false;     // no usable member, aggregate = member mean triple
};

// Split-normal mixture aggregation of one sample's member triples. Members
// whose triple is not strictly ordered, or whose fit never gets close, are
// skipped and the mixture renormalises over the rest; with nothing left the
// sample falls back to the plain member mean (flagged in notes). The point
// estimate is always the exact arithmetic mean of the member points.
IntervalPrediction aggregate_snm(std::span<const IntervalPrediction> members,
                                 double alpha, const FitConfig& fit_cfg,
                                 AggregateNotes* notes = nullptr);

// Standard-error aggregation: mean of each bound +/- 1.96 times its standard
// error (sample std / sqrt(m)); the paper variant keeps the bare std. Member
// points that escape their own interval are clamped before averaging.
// Requires m >= 2 (throws std::domain_error otherwise).
IntervalPrediction aggregate_sem(std::span<const IntervalPrediction> members,
                                 bool divide_by_sqrt_m,
                                 AggregateNotes* notes = nullptr);

struct PredictOutput {
  std::vector<IntervalPrediction> aggregated;
  MemberOutputs members;
  long snm_skipped_members = 0;
  long sem_clamped_points = 0;
  std::vector<std::size_t> fallback_samples;
};

// Full ensemble prediction under one aggregation mode. A single-member
// ensemble passes the member triple through unchanged. Aggregation::kNone
// leaves `aggregated` empty and only fills the member outputs.
PredictOutput predict(const Ensemble& ens, std::span<const double> x,
                      std::size_t n, Aggregation agg, double alpha,
                      const EnsembleConfig& cfg, int workers = 1);

// Checkpoint directory: a manifest plus one model file per member. The
// standardizer travels with the ensemble so saved models can score raw data.
void save_ensemble(const Ensemble& ens, const EnsembleConfig& cfg,
                   const Standardizer& st, const std::string& dir);

struct LoadedEnsemble {
  Ensemble ensemble;
  EnsembleConfig cfg;
  Standardizer standardizer;
};

LoadedEnsemble load_ensemble(const std::string& dir);

}  // namespace piqd
