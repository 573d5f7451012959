#include "piqd/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "piqd/parallel.hpp"
#include "piqd/rng.hpp"

namespace piqd {

namespace {

constexpr double kZ975 = 1.96;  // two-sided 95% normal score, by convention
// A fit is usable when both coverage residuals land reasonably close; far
// worse than this means the optimiser never found the distribution.
constexpr double kFitAcceptResidual = 1e-3;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::kQdPlus:
      return "qd_plus";
    case LossKind::kQd:
      return "qd";
    case LossKind::kMseOnly:
      return "mse";
  }
  return "?";
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "qd_plus") return LossKind::kQdPlus;
  if (s == "qd") return LossKind::kQd;
  if (s == "mse") return LossKind::kMseOnly;
  throw ParseError("unknown loss kind: " + s);
}

}  // namespace

const char* to_string(Aggregation a) {
  switch (a) {
    case Aggregation::kSnm:
      return "snm";
    case Aggregation::kSem:
      return "sem";
    case Aggregation::kSemPop:
      return "sem-pop";
    case Aggregation::kNone:
      return "none";
  }
  return "?";
}

const char* to_string(PointPolicy p) {
  return p == PointPolicy::kHeadMean ? "head_mean" : "midpoint";
}

Aggregation aggregation_from_string(const std::string& s) {
  if (s == "snm") return Aggregation::kSnm;
  if (s == "sem") return Aggregation::kSem;
  if (s == "sem-pop") return Aggregation::kSemPop;
  if (s == "none") return Aggregation::kNone;
  throw ParseError("unknown aggregation: " + s);
}

PointPolicy point_policy_from_string(const std::string& s) {
  if (s == "head_mean") return PointPolicy::kHeadMean;
  if (s == "midpoint") return PointPolicy::kMidpoint;
  throw ParseError("unknown point policy: " + s);
}

void EnsembleConfig::validate() const {
  if (members < 1)
    throw std::invalid_argument("EnsembleConfig: members must be >= 1");
  if (retry_limit < 0)
    throw std::invalid_argument("EnsembleConfig: retry_limit must be >= 0");
  train.validate();
}

Ensemble train_ensemble(const DataView& train_data, const EnsembleConfig& cfg,
                        RetryStats* stats, int workers) {
  cfg.validate();
  int m = cfg.members;
  std::vector<std::optional<Mlp>> slots(m);
  std::vector<std::uint64_t> seeds(m, 0);
  std::vector<int> attempts(m, 0);
  std::vector<int> failures(m, 0);

  parallel_for(m, workers, [&](std::size_t j) {
    std::string last_reason;
    for (int attempt = 0; attempt <= cfg.retry_limit; ++attempt) {
      std::uint64_t seed =
          derive_seed(cfg.train.seed, j, static_cast<std::uint64_t>(attempt));
      Mlp model(cfg.arch, seed);
      TrainConfig tc = cfg.train;
      tc.seed = seed;
      TrainResult tr = train(model, train_data, std::nullopt, tc);
      ++attempts[j];
      if (!tr.failed) {
        slots[j] = std::move(model);
        seeds[j] = seed;
        return;
      }
      ++failures[j];
      last_reason = tr.failure_reason;
    }
    std::ostringstream os;
    os << "ensemble member " << j << " failed all " << cfg.retry_limit + 1
       << " attempts; last failure: " << last_reason;
    throw TrainingError(os.str());
  });

  Ensemble ens;
  ens.members.reserve(m);
  ens.seeds = std::move(seeds);
  for (int j = 0; j < m; ++j) ens.members.push_back(std::move(*slots[j]));
  if (stats) {
    stats->attempts_per_member = attempts;
    stats->total_retries = 0;
    for (int f : failures) stats->total_retries += f;
  }
  return ens;
}

MemberOutputs member_predict(const Ensemble& ens, std::span<const double> x,
                             std::size_t n, PointPolicy policy) {
  MemberOutputs out;
  out.n = n;
  out.m = ens.size();
  out.preds.resize(n * ens.size());
  for (int j = 0; j < ens.size(); ++j) {
    auto preds = ens.members[j].predict(x, n);
    for (std::size_t i = 0; i < n; ++i) {
      IntervalPrediction p = preds[i];
      if (policy == PointPolicy::kMidpoint)
        p.point = 0.5 * (p.lower + p.upper);
      out.preds[i * ens.size() + j] = p;
    }
  }
  return out;
}

IntervalPrediction aggregate_snm(std::span<const IntervalPrediction> members,
                                 double alpha, const FitConfig& fit_cfg,
                                 AggregateNotes* notes) {
  if (members.empty())
    throw std::invalid_argument("aggregate_snm: no members");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::domain_error("aggregate_snm: alpha must lie in (0, 1)");
  AggregateNotes local;
  std::vector<SplitNormal> comps;
  comps.reserve(members.size());
  double point_sum = 0.0;
  for (const auto& p : members) {
    point_sum += p.point;
    if (!(p.lower < p.point && p.point < p.upper)) {
      ++local.skipped_members;
      continue;
    }
    FitResult fr = fit(p.lower, p.point, p.upper, alpha, fit_cfg);
    if (std::max(std::fabs(fr.residual_lower), std::fabs(fr.residual_upper)) >
        kFitAcceptResidual) {
      ++local.skipped_members;
      continue;
    }
    comps.push_back(fr.sn);
  }
  IntervalPrediction out{};
  out.point = point_sum / static_cast<double>(members.size());
  if (comps.empty()) {
    // Nothing fit: fall back to the member mean triple and flag the sample.
    double lo = 0.0, hi = 0.0;
    for (const auto& p : members) {
      lo += p.lower;
      hi += p.upper;
    }
    out.lower = lo / static_cast<double>(members.size());
    out.upper = hi / static_cast<double>(members.size());
    local.fallback = true;
  } else {
    SplitNormalMixture mix(std::move(comps));
    out.lower = mixture_quantile(mix, alpha / 2.0);
    out.upper = mixture_quantile(mix, 1.0 - alpha / 2.0);
  }
  if (notes) *notes = local;
  return out;
}

IntervalPrediction aggregate_sem(std::span<const IntervalPrediction> members,
                                 bool divide_by_sqrt_m,
                                 AggregateNotes* notes) {
  std::size_t m = members.size();
  if (m < 2)
    throw std::domain_error("aggregate_sem: needs at least 2 members");
  AggregateNotes local;
  double mean_lo = 0.0, mean_hi = 0.0, mean_pt = 0.0;
  for (const auto& p : members) {
    mean_lo += p.lower;
    mean_hi += p.upper;
    double lo = std::min(p.lower, p.upper);
    double hi = std::max(p.lower, p.upper);
    double pt = p.point;
    if (pt < lo || pt > hi) {
      pt = std::clamp(pt, lo, hi);
      ++local.clamped_points;
    }
    mean_pt += pt;
  }
  double inv_m = 1.0 / static_cast<double>(m);
  mean_lo *= inv_m;
  mean_hi *= inv_m;
  mean_pt *= inv_m;
  double var_lo = 0.0, var_hi = 0.0;
  for (const auto& p : members) {
    var_lo += (p.lower - mean_lo) * (p.lower - mean_lo);
    var_hi += (p.upper - mean_hi) * (p.upper - mean_hi);
  }
  // Sample standard deviation (m - 1 in the denominator).
  double sd_lo = std::sqrt(var_lo / static_cast<double>(m - 1));
  double sd_hi = std::sqrt(var_hi / static_cast<double>(m - 1));
  double scale = divide_by_sqrt_m ? 1.0 / std::sqrt(static_cast<double>(m)) : 1.0;
  IntervalPrediction out;
  out.lower = mean_lo - kZ975 * sd_lo * scale;
  out.upper = mean_hi + kZ975 * sd_hi * scale;
  out.point = mean_pt;
  if (notes) *notes = local;
  return out;
}

PredictOutput predict(const Ensemble& ens, std::span<const double> x,
                      std::size_t n, Aggregation agg, double alpha,
                      const EnsembleConfig& cfg, int workers) {
  PredictOutput out;
  out.members = member_predict(ens, x, n, cfg.point_policy);
  if (agg == Aggregation::kNone) return out;
  out.aggregated.resize(n);
  if (ens.size() == 1) {
    // A lone member degenerates to itself under every aggregation.
    for (std::size_t i = 0; i < n; ++i)
      out.aggregated[i] = out.members.preds[i];
    return out;
  }
  std::vector<AggregateNotes> notes(n);
  if (agg == Aggregation::kSnm) {
    parallel_for(n, workers, [&](std::size_t i) {
      out.aggregated[i] =
          aggregate_snm(out.members.row(i), alpha, cfg.fit, &notes[i]);
    });
  } else {
    bool divide = agg == Aggregation::kSem;
    for (std::size_t i = 0; i < n; ++i)
      out.aggregated[i] = aggregate_sem(out.members.row(i), divide, &notes[i]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.snm_skipped_members += notes[i].skipped_members;
    out.sem_clamped_points += notes[i].clamped_points;
    if (notes[i].fallback) out.fallback_samples.push_back(i);
  }
  return out;
}

namespace {

std::string config_text(const EnsembleConfig& cfg) {
  std::ostringstream os;
  os << "members " << cfg.members << '\n';
  os << "retry_limit " << cfg.retry_limit << '\n';
  os << "arch " << cfg.arch.input_dim << ' ' << cfg.arch.hidden1 << ' '
     << cfg.arch.hidden2 << '\n';
  os << "point_policy " << to_string(cfg.point_policy) << '\n';
  os << "loss " << to_string(cfg.train.loss) << '\n';
  os << "learning_rate " << fmt_double(cfg.train.learning_rate) << '\n';
  os << "decay_rate " << fmt_double(cfg.train.decay_rate) << '\n';
  os << "epochs " << cfg.train.epochs << '\n';
  os << "batch_size " << cfg.train.batch_size << '\n';
  os << "seed " << cfg.train.seed << '\n';
  const LossParams& lp = cfg.train.loss_params;
  os << "alpha " << fmt_double(lp.alpha) << '\n';
  os << "lambda_qd " << fmt_double(lp.lambda_qd) << '\n';
  os << "lambda1 " << fmt_double(lp.lambda1) << '\n';
  os << "lambda2 " << fmt_double(lp.lambda2) << '\n';
  os << "xi " << fmt_double(lp.xi) << '\n';
  os << "softness " << fmt_double(lp.softness) << '\n';
  os << "scale_coverage " << (lp.scale_coverage_term ? 1 : 0) << '\n';
  os << "fit " << cfg.fit.max_iters << ' ' << fmt_double(cfg.fit.learning_rate)
     << ' ' << fmt_double(cfg.fit.tolerance) << ' '
     << fmt_double(cfg.fit.positivity_floor) << '\n';
  return os.str();
}

}  // namespace

void save_ensemble(const Ensemble& ens, const EnsembleConfig& cfg,
                   const Standardizer& st, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::string cfg_text = config_text(cfg);
  std::ofstream out(fs::path(dir) / "ensemble.txt");
  if (!out)
    throw IoError("save_ensemble: cannot write manifest in " + dir);
  out << "piqd-ensemble v1\n";
  out << cfg_text;
  char hex[32];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(fnv1a(cfg_text)));
  out << "config_hash " << hex << '\n';
  out << "seeds";
  for (std::uint64_t s : ens.seeds) out << ' ' << s;
  out << '\n';
  out << "x_mean";
  for (double v : st.x_mean) out << ' ' << fmt_double(v);
  out << '\n';
  out << "x_std";
  for (double v : st.x_std) out << ' ' << fmt_double(v);
  out << '\n';
  out << "y_mean " << fmt_double(st.y_mean) << '\n';
  out << "y_std " << fmt_double(st.y_std) << '\n';
  for (int j = 0; j < ens.size(); ++j) {
    std::string fname = "member_" + std::to_string(j) + ".txt";
    out << "member " << j << ' ' << fname << '\n';
    save_model(ens.members[j], (fs::path(dir) / fname).string());
  }
  if (!out) throw IoError("save_ensemble: write failed in " + dir);
}

LoadedEnsemble load_ensemble(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "ensemble.txt");
  if (!in)
    throw IoError("load_ensemble: cannot open manifest in " + dir);
  std::string magic, version;
  in >> magic >> version;
  if (magic != "piqd-ensemble" || version != "v1")
    throw ParseError("load_ensemble: bad manifest header in " + dir);

  LoadedEnsemble out;
  EnsembleConfig& cfg = out.cfg;
  Standardizer& st = out.standardizer;
  std::string stored_hash;
  std::vector<std::pair<int, std::string>> member_files;
  std::string key;
  while (in >> key) {
    if (key == "members") {
      in >> cfg.members;
    } else if (key == "retry_limit") {
      in >> cfg.retry_limit;
    } else if (key == "arch") {
      in >> cfg.arch.input_dim >> cfg.arch.hidden1 >> cfg.arch.hidden2;
    } else if (key == "point_policy") {
      std::string s;
      in >> s;
      cfg.point_policy = point_policy_from_string(s);
    } else if (key == "loss") {
      std::string s;
      in >> s;
      cfg.train.loss = loss_kind_from_string(s);
    } else if (key == "learning_rate") {
      in >> cfg.train.learning_rate;
    } else if (key == "decay_rate") {
      in >> cfg.train.decay_rate;
    } else if (key == "epochs") {
      in >> cfg.train.epochs;
    } else if (key == "batch_size") {
      in >> cfg.train.batch_size;
    } else if (key == "seed") {
      in >> cfg.train.seed;
    } else if (key == "alpha") {
      in >> cfg.train.loss_params.alpha;
    } else if (key == "lambda_qd") {
      in >> cfg.train.loss_params.lambda_qd;
    } else if (key == "lambda1") {
      in >> cfg.train.loss_params.lambda1;
    } else if (key == "lambda2") {
      in >> cfg.train.loss_params.lambda2;
    } else if (key == "xi") {
      in >> cfg.train.loss_params.xi;
    } else if (key == "softness") {
      in >> cfg.train.loss_params.softness;
    } else if (key == "scale_coverage") {
      int v = 0;
      in >> v;
      cfg.train.loss_params.scale_coverage_term = v != 0;
    } else if (key == "fit") {
      in >> cfg.fit.max_iters >> cfg.fit.learning_rate >> cfg.fit.tolerance >>
          cfg.fit.positivity_floor;
    } else if (key == "config_hash") {
      in >> stored_hash;
    } else if (key == "seeds") {
      out.ensemble.seeds.clear();
      for (int j = 0; j < cfg.members; ++j) {
        std::uint64_t s;
        in >> s;
        out.ensemble.seeds.push_back(s);
      }
    } else if (key == "x_mean" || key == "x_std") {
      auto& vec = key == "x_mean" ? st.x_mean : st.x_std;
      vec.clear();
      for (int c = 0; c < cfg.arch.input_dim; ++c) {
        double v;
        in >> v;
        vec.push_back(v);
      }
    } else if (key == "y_mean") {
      in >> st.y_mean;
    } else if (key == "y_std") {
      in >> st.y_std;
    } else if (key == "member") {
      int j;
      std::string fname;
      in >> j >> fname;
      member_files.emplace_back(j, fname);
    } else {
      throw ParseError("load_ensemble: unknown manifest key " + key);
    }
    if (in.fail())
      throw ParseError("load_ensemble: bad manifest value for " + key);
  }

  char hex[32];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(fnv1a(config_text(cfg))));
  if (stored_hash != hex)
    throw ParseError("load_ensemble: config hash mismatch in " + dir);
  if (static_cast<int>(member_files.size()) != cfg.members)
    throw ParseError("load_ensemble: member count mismatch in " + dir);
  std::sort(member_files.begin(), member_files.end());
  for (auto& [j, fname] : member_files)
    out.ensemble.members.push_back(
        load_model((fs::path(dir) / fname).string()));
  return out;
}

}  // namespace piqd
