#pragma once

// Tabular datasets: CSV load/save (last column is the target), manifest
// validation, standardization with either training-split or full-dataset
// statistics, shuffled trial splits, validation folds and a built-in
// heteroscedastic sinusoid generator.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace piqd {

struct Dataset {
  std::string name;
  std::vector<double> x;  // row-major n x d
  std::vector<double> y;  // n targets
  std::size_t n = 0;
  std::size_t d = 0;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem-level failures (missing files, failed writes), kept apart from
// format errors so callers can map them to distinct exit codes.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Loads a CSV whose last column is the target. Every cell must parse as a
// finite double; violations raise ParseError naming the row and column
// (1-based). has_header skips the first line.
Dataset load_csv(const std::string& path, bool has_header = false);

// Writes features then target, 17 significant digits, exact round trip.
void save_csv(const Dataset& ds, const std::string& path);

struct DatasetManifest {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;  // feature columns, target excluded
};

// key/value lines ("name yacht", "rows 308", "cols 6"); '#' comments.
DatasetManifest load_manifest(const std::string& path);

// Throws std::runtime_error when shape or name disagree.
void validate_against_manifest(const Dataset& ds, const DatasetManifest& m);

struct Standardizer {
  std::vector<double> x_mean, x_std;  // per feature column
  double y_mean = 0.0, y_std = 1.0;
  int clamped_columns = 0;  // zero-variance columns whose std was forced to 1

  double standardize_y(double y) const { return (y - y_mean) / y_std; }
  double destandardize_y(double z) const { return z * y_std + y_mean; }
};

// Statistics over a row subset (empty subset = all rows). Columns with
// (near-)zero variance get std 1 and are counted in clamped_columns.
Standardizer compute_stats(const Dataset& ds,
                           std::span<const std::size_t> rows = {});

// Applies (v - mean) / std to every feature column and the target.
Dataset standardize(const Dataset& ds, const Standardizer& st);

// Re-expresses a target-scale value standardized under `from` in the
// standardized coordinates of `to` (e.g. training-split scale to
// full-dataset scale, where widths and errors are reported).
double rescale_target(double v, const Standardizer& from,
                      const Standardizer& to);

Dataset subset(const Dataset& ds, std::span<const std::size_t> rows);

struct TrialSplit {
  int trial = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> train_idx, test_idx;
};

// Independent shuffled train/test splits, one per trial. The test size is
// round(n * test_fraction) clamped to [1, n-1].
std::vector<TrialSplit> make_trials(std::size_t n, int trial_count,
                                    double test_fraction,
                                    std::uint64_t master_seed);

struct ValidationFold {
  std::vector<std::size_t> train_idx, val_idx;
};

// Independently shuffled train/validation splits over the given rows.
std::vector<ValidationFold> make_validation_folds(
    std::span<const std::size_t> rows, int folds, double val_fraction,
    std::uint64_t seed);

// 1-D benchmark: y = sin(x) + eps(x) on x in [-4, 4], where the noise scale
// grows quadratically from 0.05 at the center to 0.20 at the edges and the
// sampling density thins toward the edges (acceptance probability falls
// quadratically from 1 at x = 0 to 0.15 at |x| = 4).
Dataset make_sinusoid(std::size_t n, std::uint64_t seed);

}  // namespace piqd
