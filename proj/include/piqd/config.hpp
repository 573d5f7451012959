#pragma once

// key = value configuration files ('#' comments, blank lines ignored) plus
// the mapping from config keys to the experiment structures. Typed getters
// remember which keys were read so typos can be reported back.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "piqd/experiment.hpp"

namespace piqd {

class KeyValueConfig {
 public:
  static KeyValueConfig from_file(const std::string& path);
  static KeyValueConfig from_string(const std::string& text);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  int get_int(const std::string& key, int fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback);
  std::vector<std::string> get_string_list(
      const std::string& key, const std::vector<std::string>& fallback);

  // Keys present in the file that no getter ever touched.
  std::vector<std::string> unused_keys() const;

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

// Everything a CLI run needs, assembled from a config file.
struct RunSpec {
  std::string dataset;  // "sinusoid" or a CSV path
  std::string manifest; // optional manifest to validate the CSV against
  bool csv_header = false;
  std::size_t sinusoid_n = 600;
  std::uint64_t sinusoid_seed = 7;
  std::string output_dir = ".";
  ExperimentConfig experiment;
  HpsSpace hps;
  std::vector<double> sens_lambda1{0.9, 0.95, 0.975};
  std::vector<double> sens_lambda2{0.05, 0.1, 0.2};
  std::vector<double> sens_xi{0.0, 10.0};
};

// Reads the recognised keys (missing ones keep their defaults) and reports
// unknown keys through `warnings`.
RunSpec build_run_spec(KeyValueConfig& cfg, std::vector<std::string>* warnings);

// Loads the dataset a RunSpec points at: the named CSV (validated against the
// manifest when one is given) or a generated sinusoid.
Dataset load_run_dataset(const RunSpec& spec);

}  // namespace piqd
