#include "piqd/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "piqd/rng.hpp"

namespace piqd {

namespace {

constexpr std::uint64_t kTrialSalt = 0x747269616cull;
constexpr std::uint64_t kFoldSalt = 0x666f6c64ull;

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
  std::string t = trim(cell);
  auto fail = [&](const char* why) -> ParseError {
    std::ostringstream os;
    os << "CSV row " << row << " column " << col << ": " << why << " ('" << t
       << "')";
    return ParseError(os.str());
  };
  if (t.empty()) throw fail("empty cell");
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size())
    throw fail("not a number");
  if (!std::isfinite(v)) throw fail("non-finite value");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace

Dataset load_csv(const std::string& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  Dataset ds;
  ds.name = path;
  std::string line;
  std::size_t row = 0;
  bool first_data_row = true;
  while (std::getline(in, line)) {
    ++row;
    if (row == 1 && has_header) continue;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (first_data_row) {
      if (cells.size() < 2)
        throw ParseError("CSV row " + std::to_string(row) +
                         ": need at least one feature column and a target");
      ds.d = cells.size() - 1;
      first_data_row = false;
    } else if (cells.size() != ds.d + 1) {
      std::ostringstream os;
      os << "CSV row " << row << ": expected " << ds.d + 1 << " columns, got "
         << cells.size();
      throw ParseError(os.str());
    }
    for (std::size_t c = 0; c < ds.d; ++c)
      ds.x.push_back(parse_cell(cells[c], row, c + 1));
    ds.y.push_back(parse_cell(cells[ds.d], row, ds.d + 1));
    ++ds.n;
  }
  if (ds.n == 0) throw ParseError(path + ": no data rows");
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_csv: cannot open " + path);
  char buf[64];
  for (std::size_t i = 0; i < ds.n; ++i) {
    for (std::size_t c = 0; c < ds.d; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.x[i * ds.d + c]);
      out << buf << ',';
    }
    std::snprintf(buf, sizeof buf, "%.17g", ds.y[i]);
    out << buf << '\n';
  }
  if (!out) throw IoError("save_csv: write failed for " + path);
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  DatasetManifest m;
  bool saw_name = false, saw_rows = false, saw_cols = false;
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream is(t);
    std::string key;
    is >> key;
    if (key == "name") {
      is >> m.name;
      saw_name = true;
    } else if (key == "rows") {
      is >> m.rows;
      saw_rows = true;
    } else if (key == "cols") {
      is >> m.cols;
      saw_cols = true;
    }  // unknown keys are allowed for forward compatibility
    if (is.fail()) throw ParseError(path + ": bad manifest line: " + t);
  }
  if (!saw_name || !saw_rows || !saw_cols)
    throw ParseError(path + ": manifest needs name, rows and cols");
  return m;
}

void validate_against_manifest(const Dataset& ds, const DatasetManifest& m) {
  std::ostringstream os;
  if (ds.n != m.rows || ds.d != m.cols) {
    os << "dataset shape " << ds.n << "x" << ds.d << " disagrees with manifest "
       << m.rows << "x" << m.cols;
    throw ParseError(os.str());
  }
}

Standardizer compute_stats(const Dataset& ds,
                           std::span<const std::size_t> rows) {
  if (ds.n == 0) throw std::invalid_argument("compute_stats: empty dataset");
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(ds.n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    rows = all;
  }
  double count = static_cast<double>(rows.size());
  Standardizer st;
  st.x_mean.assign(ds.d, 0.0);
  st.x_std.assign(ds.d, 0.0);
  for (std::size_t r : rows) {
    for (std::size_t c = 0; c < ds.d; ++c) st.x_mean[c] += ds.x[r * ds.d + c];
    st.y_mean += ds.y[r];
  }
  for (std::size_t c = 0; c < ds.d; ++c) st.x_mean[c] /= count;
  st.y_mean /= count;
  double y_var = 0.0;
  for (std::size_t r : rows) {
    for (std::size_t c = 0; c < ds.d; ++c) {
      double dx = ds.x[r * ds.d + c] - st.x_mean[c];
      st.x_std[c] += dx * dx;
    }
    double dy = ds.y[r] - st.y_mean;
    y_var += dy * dy;
  }
  constexpr double kTiny = 1e-12;
  for (std::size_t c = 0; c < ds.d; ++c) {
    st.x_std[c] = std::sqrt(st.x_std[c] / count);
    if (st.x_std[c] < kTiny) {
      st.x_std[c] = 1.0;
      ++st.clamped_columns;
    }
  }
  st.y_std = std::sqrt(y_var / count);
  if (st.y_std < kTiny) {
    st.y_std = 1.0;
    ++st.clamped_columns;
  }
  return st;
}

Dataset standardize(const Dataset& ds, const Standardizer& st) {
  if (st.x_mean.size() != ds.d)
    throw std::invalid_argument("standardize: stats dimension mismatch");
  Dataset out;
  out.name = ds.name;
  out.n = ds.n;
  out.d = ds.d;
  out.x.resize(ds.x.size());
  out.y.resize(ds.y.size());
  for (std::size_t i = 0; i < ds.n; ++i) {
    for (std::size_t c = 0; c < ds.d; ++c)
      out.x[i * ds.d + c] =
          (ds.x[i * ds.d + c] - st.x_mean[c]) / st.x_std[c];
    out.y[i] = st.standardize_y(ds.y[i]);
  }
  return out;
}

double rescale_target(double v, const Standardizer& from,
                      const Standardizer& to) {
  return (v * from.y_std + from.y_mean - to.y_mean) / to.y_std;
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> rows) {
  Dataset out;
  out.name = ds.name;
  out.d = ds.d;
  out.n = rows.size();
  out.x.reserve(rows.size() * ds.d);
  out.y.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= ds.n) throw std::out_of_range("subset: row index out of range");
    out.x.insert(out.x.end(), ds.x.begin() + r * ds.d,
                 ds.x.begin() + (r + 1) * ds.d);
    out.y.push_back(ds.y[r]);
  }
  return out;
}

std::vector<TrialSplit> make_trials(std::size_t n, int trial_count,
                                    double test_fraction,
                                    std::uint64_t master_seed) {
  if (n < 2) throw std::invalid_argument("make_trials: need n >= 2");
  if (trial_count < 1)
    throw std::invalid_argument("make_trials: need trial_count >= 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("make_trials: test_fraction must be in (0,1)");
  std::size_t n_test = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * test_fraction));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
  std::vector<TrialSplit> out;
  out.reserve(trial_count);
  for (int t = 0; t < trial_count; ++t) {
    TrialSplit ts;
    ts.trial = t;
    ts.seed = derive_seed(master_seed, static_cast<std::uint64_t>(t),
                          kTrialSalt);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(ts.seed);
    rng.shuffle(idx);
    ts.test_idx.assign(idx.begin(), idx.begin() + n_test);
    ts.train_idx.assign(idx.begin() + n_test, idx.end());
    out.push_back(std::move(ts));
  }
  return out;
}

std::vector<ValidationFold> make_validation_folds(
    std::span<const std::size_t> rows, int folds, double val_fraction,
    std::uint64_t seed) {
  if (rows.size() < 2)
    throw std::invalid_argument("make_validation_folds: need >= 2 rows");
  if (folds < 1) throw std::invalid_argument("make_validation_folds: folds >= 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw std::invalid_argument(
        "make_validation_folds: val_fraction must be in (0,1)");
  std::size_t n_val = static_cast<std::size_t>(
      std::llround(static_cast<double>(rows.size()) * val_fraction));
  n_val = std::clamp<std::size_t>(n_val, 1, rows.size() - 1);
  std::vector<ValidationFold> out;
  out.reserve(folds);
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(f), kFoldSalt));
    rng.shuffle(idx);
    ValidationFold vf;
    vf.val_idx.assign(idx.begin(), idx.begin() + n_val);
    vf.train_idx.assign(idx.begin() + n_val, idx.end());
    out.push_back(std::move(vf));
  }
  return out;
}

Dataset make_sinusoid(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("make_sinusoid: n must be >= 1");
  Dataset ds;
  ds.name = "sinusoid";
  ds.d = 1;
  ds.n = n;
  ds.x.reserve(n);
  ds.y.reserve(n);
  Rng rng(seed);
  while (ds.x.size() < n) {
    double x = rng.uniform(-4.0, 4.0);
    double rel = std::fabs(x) / 4.0;
    double keep = 0.15 + 0.85 * (1.0 - rel) * (1.0 - rel);
    if (rng.uniform() >= keep) continue;
    double noise_sd = 0.05 + 0.15 * rel * rel;
    ds.x.push_back(x);
    ds.y.push_back(std::sin(x) + noise_sd * rng.normal());
  }
  return ds;
}

}  // namespace piqd
