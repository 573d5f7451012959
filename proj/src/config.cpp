#include "piqd/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace piqd {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double d = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw ParseError("config key '" + key + "': bad number '" + v +
                             "'");
  return d;
}

}  // namespace

KeyValueConfig KeyValueConfig::from_string(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(lineno) +
                               ": expected key = value, got '" + t + "'");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ParseError("config line " + std::to_string(lineno) +
                               ": empty key");
    cfg.values_[key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

bool KeyValueConfig::has(const std::string& key) const {
  return values_.count(key) > 0;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) {
  consumed_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) {
  consumed_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_double(key, it->second);
}

int KeyValueConfig::get_int(const std::string& key, int fallback) {
  consumed_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  int v = 0;
  auto [p, ec] =
      std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (ec != std::errc{} || p != it->second.data() + it->second.size())
    throw ParseError("config key '" + key + "': bad integer '" +
                             it->second + "'");
  return v;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key,
                                      std::uint64_t fallback) {
  consumed_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::uint64_t v = 0;
  auto [p, ec] =
      std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (ec != std::errc{} || p != it->second.data() + it->second.size())
    throw ParseError("config key '" + key + "': bad integer '" +
                             it->second + "'");
  return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) {
  consumed_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ParseError("config key '" + key + "': bad boolean '" + v + "'");
}

std::vector<double> KeyValueConfig::get_double_list(
    const std::string& key, const std::vector<double>& fallback) {
  consumed_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  for (const std::string& tok : split(it->second, ','))
    if (!tok.empty()) out.push_back(parse_double(key, tok));
  if (out.empty())
    throw ParseError("config key '" + key + "': empty list");
  return out;
}

std::vector<std::string> KeyValueConfig::get_string_list(
    const std::string& key, const std::vector<std::string>& fallback) {
  consumed_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<std::string> out;
  for (const std::string& tok : split(it->second, ','))
    if (!tok.empty()) out.push_back(tok);
  if (out.empty())
    throw ParseError("config key '" + key + "': empty list");
  return out;
}

std::vector<std::string> KeyValueConfig::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (!consumed_.count(k)) out.push_back(k);
  return out;
}

RunSpec build_run_spec(KeyValueConfig& cfg,
                       std::vector<std::string>* warnings) {
  RunSpec spec;
  spec.dataset = cfg.get_string("dataset", "sinusoid");
  spec.manifest = cfg.get_string("dataset.manifest", "");
  spec.csv_header = cfg.get_bool("dataset.header", false);
  spec.sinusoid_n = static_cast<std::size_t>(
      cfg.get_int("sinusoid.n", static_cast<int>(spec.sinusoid_n)));
  spec.sinusoid_seed = cfg.get_u64("sinusoid.seed", spec.sinusoid_seed);
  spec.output_dir = cfg.get_string("output_dir", spec.output_dir);

  ExperimentConfig& ex = spec.experiment;
  ex.model = model_kind_from_string(cfg.get_string("model", "qd+"));
  ex.protocol.trials = cfg.get_int("trials", ex.protocol.trials);
  ex.protocol.test_fraction =
      cfg.get_double("test_fraction", ex.protocol.test_fraction);
  ex.protocol.master_seed = cfg.get_u64("seed", ex.protocol.master_seed);
  ex.workers = cfg.get_int("workers", ex.workers);
  ex.member_level_eval =
      cfg.get_bool("member_level_eval", ex.member_level_eval);
  ex.aggregations.clear();
  for (const std::string& a : cfg.get_string_list("aggregation", {"snm"}))
    ex.aggregations.push_back(aggregation_from_string(a));

  EnsembleConfig& en = ex.ensemble;
  en.members = cfg.get_int("members", en.members);
  en.retry_limit = cfg.get_int("retry_limit", en.retry_limit);
  en.arch.hidden1 = cfg.get_int("hidden1", en.arch.hidden1);
  en.arch.hidden2 = cfg.get_int("hidden2", en.arch.hidden2);
  en.train.learning_rate =
      cfg.get_double("learning_rate", en.train.learning_rate);
  en.train.decay_rate = cfg.get_double("decay_rate", en.train.decay_rate);
  en.train.epochs = cfg.get_int("epochs", en.train.epochs);
  en.train.batch_size = cfg.get_int("batch_size", en.train.batch_size);
  LossParams& lp = en.train.loss_params;
  lp.alpha = cfg.get_double("alpha", lp.alpha);
  lp.lambda_qd = cfg.get_double("lambda_qd", lp.lambda_qd);
  lp.lambda1 = cfg.get_double("lambda1", lp.lambda1);
  lp.lambda2 = cfg.get_double("lambda2", lp.lambda2);
  lp.xi = cfg.get_double("xi", lp.xi);
  lp.softness = cfg.get_double("softness", lp.softness);
  lp.scale_coverage_term =
      cfg.get_bool("scale_coverage", lp.scale_coverage_term);
  en.fit.max_iters = cfg.get_int("fit.max_iters", en.fit.max_iters);
  en.fit.learning_rate =
      cfg.get_double("fit.learning_rate", en.fit.learning_rate);
  en.fit.tolerance = cfg.get_double("fit.tolerance", en.fit.tolerance);
  en.fit.positivity_floor =
      cfg.get_double("fit.positivity_floor", en.fit.positivity_floor);

  HpsSpace& h = spec.hps;
  h.samples = cfg.get_int("hps.samples", h.samples);
  h.learning_rate.lo = cfg.get_double("hps.learning_rate_lo", h.learning_rate.lo);
  h.learning_rate.hi = cfg.get_double("hps.learning_rate_hi", h.learning_rate.hi);
  h.decay_rate.lo = cfg.get_double("hps.decay_rate_lo", h.decay_rate.lo);
  h.decay_rate.hi = cfg.get_double("hps.decay_rate_hi", h.decay_rate.hi);
  h.lambda1.lo = cfg.get_double("hps.lambda1_lo", h.lambda1.lo);
  h.lambda1.hi = cfg.get_double("hps.lambda1_hi", h.lambda1.hi);
  h.lambda2.lo = cfg.get_double("hps.lambda2_lo", h.lambda2.lo);
  h.lambda2.hi = cfg.get_double("hps.lambda2_hi", h.lambda2.hi);
  h.epochs_lo = cfg.get_int("hps.epochs_lo", h.epochs_lo);
  h.epochs_hi = cfg.get_int("hps.epochs_hi", h.epochs_hi);

  spec.sens_lambda1 = cfg.get_double_list("sensitivity.lambda1", spec.sens_lambda1);
  spec.sens_lambda2 = cfg.get_double_list("sensitivity.lambda2", spec.sens_lambda2);
  spec.sens_xi = cfg.get_double_list("sensitivity.xi", spec.sens_xi);

  if (warnings)
    for (const std::string& k : cfg.unused_keys())
      warnings->push_back("unknown config key: " + k);
  return spec;
}

Dataset load_run_dataset(const RunSpec& spec) {
  if (spec.dataset == "sinusoid")
    return make_sinusoid(spec.sinusoid_n, spec.sinusoid_seed);
  Dataset ds = load_csv(spec.dataset, spec.csv_header);
  if (!spec.manifest.empty()) {
    DatasetManifest m = load_manifest(spec.manifest);
    validate_against_manifest(ds, m);
    ds.name = m.name;
  }
  return ds;
}

}  // namespace piqd
