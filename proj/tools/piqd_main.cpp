// Command-line front end: trains ensembles, evaluates checkpoints, runs the
// trial protocol, hyper-parameter search, weight sensitivity sweeps and the
// built-in sinusoid demo. Exit codes: 0 ok, 1 usage, 2 training failure,
// 3 I/O or data-format error.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "piqd/config.hpp"
#include "piqd/experiment.hpp"
#include "piqd/report.hpp"
#include "piqd/rng.hpp"

namespace fs = std::filesystem;
using namespace piqd;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<double> alpha;
  std::optional<std::string> aggregation;
};

RunSpec load_spec(const std::string& config_path, const Overrides& o) {
  KeyValueConfig cfg = config_path.empty()
                           ? KeyValueConfig::from_string("")
                           : KeyValueConfig::from_file(config_path);
  if (o.seed) cfg.set("seed", std::to_string(*o.seed));
  if (o.workers) cfg.set("workers", std::to_string(*o.workers));
  if (o.alpha) cfg.set("alpha", std::to_string(*o.alpha));
  if (o.aggregation) cfg.set("aggregation", *o.aggregation);
  std::vector<std::string> warnings;
  RunSpec spec = build_run_spec(cfg, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  return spec;
}

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "master seed override");
  cmd->add_option("--workers", o.workers, "worker thread count");
  cmd->add_option("--alpha", o.alpha,
                  "miscoverage rate (0.05 = 95% intervals)");
  cmd->add_option("--aggregation", o.aggregation,
                  "comma list of snm,sem,sem-pop,none")
      ->check([](const std::string& v) -> std::string {
        std::stringstream ss(v);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
          if (tok != "snm" && tok != "sem" && tok != "sem-pop" &&
              tok != "none")
            return "unknown aggregation '" + tok + "'";
        }
        return {};
      });
}

void configure_for_model(EnsembleConfig& ecfg, ModelKind model,
                         std::size_t input_dim) {
  ecfg.arch.input_dim = static_cast<int>(input_dim);
  ecfg.train.loss = loss_for(model);
  ecfg.point_policy = policy_for(model);
}

int cmd_train(const std::string& config_path, const Overrides& o,
              const std::string& out_dir) {
  RunSpec spec = load_spec(config_path, o);
  Dataset ds = load_run_dataset(spec);
  Standardizer stats = compute_stats(ds);
  Dataset std_ds = standardize(ds, stats);
  EnsembleConfig ecfg = spec.experiment.ensemble;
  configure_for_model(ecfg, spec.experiment.model, ds.d);
  ecfg.train.seed = spec.experiment.protocol.master_seed;
  DataView view{std_ds.x, std_ds.y, std_ds.n, std_ds.d};
  RetryStats rs;
  Ensemble ens =
      train_ensemble(view, ecfg, &rs, spec.experiment.workers);
  save_ensemble(ens, ecfg, stats, out_dir);
  std::printf("trained %d members on %s (%zu rows), %d retries -> %s\n",
              ens.size(), ds.name.c_str(), ds.n, rs.total_retries,
              out_dir.c_str());
  return 0;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& data_path,
                 bool header, const Overrides& o) {
  LoadedEnsemble le = load_ensemble(checkpoint);
  Dataset ds = load_csv(data_path, header);
  if (static_cast<int>(ds.d) != le.cfg.arch.input_dim)
    throw ParseError("dataset has " + std::to_string(ds.d) +
                     " features, checkpoint expects " +
                     std::to_string(le.cfg.arch.input_dim));
  Aggregation agg = aggregation_from_string(
      o.aggregation.value_or(std::string("snm")));
  if (agg == Aggregation::kNone)
    throw std::invalid_argument(
        "evaluate needs an aggregated prediction; pass snm, sem or sem-pop");
  double alpha = o.alpha.value_or(le.cfg.train.loss_params.alpha);
  Dataset std_ds = standardize(ds, le.standardizer);
  PredictOutput po = predict(le.ensemble, std_ds.x, std_ds.n, agg, alpha,
                             le.cfg, o.workers.value_or(1));

  Standardizer eval_stats = compute_stats(ds);
  Dataset eval_std = standardize(ds, eval_stats);
  double range = *std::max_element(eval_std.y.begin(), eval_std.y.end()) -
                 *std::min_element(eval_std.y.begin(), eval_std.y.end());
  std::vector<double> ys(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i)
    ys[i] = eval_stats.standardize_y(ds.y[i]);
  std::vector<IntervalPrediction>& preds = po.aggregated;
  for (auto& p : preds) {
    p.lower = rescale_target(p.lower, le.standardizer, eval_stats);
    p.point = rescale_target(p.point, le.standardizer, eval_stats);
    p.upper = rescale_target(p.upper, le.standardizer, eval_stats);
  }
  EvalReport r = evaluate(preds, ys, range);
  std::printf("n=%ld picp=%.4f mpiw=%.4f nmpiw=%.4f mse=%.4f "
              "crossings=%ld point_outside=%ld\n",
              r.n, r.picp, r.mpiw, r.nmpiw, r.mse, r.crossings,
              r.point_outside);
  return 0;
}

void write_all_reports(const ExperimentResult& result,
                       const std::string& out_dir) {
  fs::create_directories(out_dir);
  write_report(result, ReportFormat::kTable,
               (fs::path(out_dir) / "report.txt").string());
  write_report(result, ReportFormat::kJson,
               (fs::path(out_dir) / "report.json").string());
  write_report(result, ReportFormat::kCsv,
               (fs::path(out_dir) / "report.csv").string());
}

int cmd_experiment(const std::string& config_path, const Overrides& o) {
  RunSpec spec = load_spec(config_path, o);
  Dataset ds = load_run_dataset(spec);
  ExperimentResult result = run_experiment(ds, spec.experiment);
  write_all_reports(result, spec.output_dir);
  std::fputs(render_report(result, ReportFormat::kTable).c_str(), stdout);
  std::printf("reports written to %s\n", spec.output_dir.c_str());
  return 0;
}

int cmd_hps(const std::string& config_path, const Overrides& o) {
  RunSpec spec = load_spec(config_path, o);
  Dataset ds = load_run_dataset(spec);
  HpsResult result = run_hps(ds, spec.hps, spec.experiment,
                             spec.experiment.protocol.master_seed);
  fs::create_directories(spec.output_dir);
  std::ofstream csv(fs::path(spec.output_dir) / "hps.csv");
  if (!csv) throw IoError("cannot write hps.csv in " + spec.output_dir);
  csv << "rank,index,learning_rate,decay_rate,epochs,lambda1,lambda2,"
         "picp,mpiw,mse,failed_folds\n";
  for (std::size_t i = 0; i < result.ranked.size(); ++i) {
    const HpsCandidate& c = result.ranked[i];
    char line[256];
    std::snprintf(line, sizeof line,
                  "%zu,%d,%.17g,%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                  i, c.index, c.learning_rate, c.decay_rate, c.epochs,
                  c.lambda1, c.lambda2, c.mean_picp, c.mean_mpiw, c.mean_mse,
                  c.failed_folds);
    csv << line;
  }
  const HpsCandidate& b = result.best;
  std::printf("# best of %d sampled configurations\n", spec.hps.samples);
  std::printf("learning_rate = %.17g\n", b.learning_rate);
  std::printf("decay_rate = %.17g\n", b.decay_rate);
  std::printf("epochs = %d\n", b.epochs);
  std::printf("lambda1 = %.17g\n", b.lambda1);
  std::printf("lambda2 = %.17g\n", b.lambda2);
  std::printf("# validation: picp=%.4f mpiw=%.4f mse=%.4f failed_folds=%d\n",
              b.mean_picp, b.mean_mpiw, b.mean_mse, b.failed_folds);
  return 0;
}

int cmd_sensitivity(const std::string& config_path, const Overrides& o) {
  RunSpec spec = load_spec(config_path, o);
  Dataset ds = load_run_dataset(spec);
  auto cells = run_sensitivity(ds, spec.sens_lambda1, spec.sens_lambda2,
                               spec.sens_xi, spec.experiment);
  fs::create_directories(spec.output_dir);
  std::ofstream csv(fs::path(spec.output_dir) / "sensitivity.csv");
  if (!csv) throw IoError("cannot write sensitivity.csv in " + spec.output_dir);
  csv << "lambda1,lambda2,xi,failed,picp,nmpiw,mse\n";
  for (const auto& c : cells) {
    char line[192];
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%d,%.17g,%.17g,%.17g\n",
                  c.lambda1, c.lambda2, c.xi, c.failed ? 1 : 0, c.picp,
                  c.nmpiw, c.mse);
    csv << line;
  }
  int failed = 0;
  for (const auto& c : cells) failed += c.failed ? 1 : 0;
  std::printf("%zu cells, %d failed -> %s/sensitivity.csv\n", cells.size(),
              failed, spec.output_dir.c_str());
  return 0;
}

int cmd_toy(const std::string& out_dir, std::size_t n, int trials,
            const Overrides& o) {
  ExperimentConfig cfg = sinusoid_experiment_config();
  if (trials > 0) cfg.protocol.trials = trials;
  if (o.seed) cfg.protocol.master_seed = *o.seed;
  if (o.workers) cfg.workers = *o.workers;
  if (o.alpha) cfg.ensemble.train.loss_params.alpha = *o.alpha;
  if (o.aggregation) {
    cfg.aggregations.clear();
    std::string list = *o.aggregation, tok;
    std::istringstream is(list);
    while (std::getline(is, tok, ','))
      cfg.aggregations.push_back(aggregation_from_string(tok));
  }
  Dataset ds = make_sinusoid(n ? n : kSinusoidSamples, kSinusoidDataSeed);
  ExperimentResult result = run_experiment(ds, cfg);
  write_all_reports(result, out_dir);
  std::fputs(render_report(result, ReportFormat::kTable).c_str(), stdout);

  // One extra ensemble on a fresh split to draw the fitted band over the
  // input range (raw coordinates, y_true = the noise-free signal).
  auto split = make_trials(ds.n, 1, 0.1, cfg.protocol.master_seed)[0];
  Standardizer tstats = compute_stats(ds, split.train_idx);
  Dataset tstd = standardize(subset(ds, split.train_idx), tstats);
  EnsembleConfig ecfg = cfg.ensemble;
  configure_for_model(ecfg, cfg.model, ds.d);
  ecfg.train.seed = derive_seed(cfg.protocol.master_seed, 0x706c6f74ull);
  DataView view{tstd.x, tstd.y, tstd.n, tstd.d};
  Ensemble ens = train_ensemble(view, ecfg, nullptr, cfg.workers);
  std::size_t grid_n = 400;
  std::vector<double> grid(grid_n), grid_std(grid_n), signal(grid_n);
  for (std::size_t i = 0; i < grid_n; ++i) {
    grid[i] = -4.0 + 8.0 * static_cast<double>(i) /
                         static_cast<double>(grid_n - 1);
    grid_std[i] = (grid[i] - tstats.x_mean[0]) / tstats.x_std[0];
    signal[i] = std::sin(grid[i]);
  }
  PredictOutput po =
      predict(ens, grid_std, grid_n, Aggregation::kSnm,
              cfg.ensemble.train.loss_params.alpha, ecfg, cfg.workers);
  for (auto& p : po.aggregated) {
    p.lower = tstats.destandardize_y(p.lower);
    p.point = tstats.destandardize_y(p.point);
    p.upper = tstats.destandardize_y(p.upper);
  }
  write_plot_data(grid, po.aggregated, signal,
                  (fs::path(out_dir) / "band.tsv").string());
  std::printf("reports and band.tsv written to %s\n", out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prediction intervals from quality-driven ensembles"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "piqd_out", data_path, checkpoint;
  bool header = false;
  std::size_t toy_n = 0;
  int toy_trials = 0;

  Overrides o;
  auto* train_cmd = app.add_subcommand(
      "train", "train one ensemble on a dataset and save a checkpoint");
  train_cmd->add_option("--config", config_path, "key = value config file");
  train_cmd->add_option("--out", out_dir, "checkpoint directory")->required();
  add_overrides(train_cmd, o);

  auto* eval_cmd = app.add_subcommand(
      "evaluate", "score a saved checkpoint on a CSV dataset");
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint directory")
      ->required();
  eval_cmd->add_option("--data", data_path, "CSV file, last column = target")
      ->required();
  eval_cmd->add_flag("--header", header, "skip the first CSV line");
  add_overrides(eval_cmd, o);

  auto* exp_cmd = app.add_subcommand(
      "experiment", "run the multi-trial evaluation protocol");
  exp_cmd->add_option("--config", config_path, "key = value config file");
  add_overrides(exp_cmd, o);

  auto* hps_cmd = app.add_subcommand(
      "hps", "random hyper-parameter search on validation folds");
  hps_cmd->add_option("--config", config_path, "key = value config file");
  add_overrides(hps_cmd, o);

  auto* sens_cmd = app.add_subcommand(
      "sensitivity", "loss-weight sensitivity sweep");
  sens_cmd->add_option("--config", config_path, "key = value config file");
  add_overrides(sens_cmd, o);

  auto* toy_cmd = app.add_subcommand(
      "toy", "built-in sinusoid benchmark with plots");
  toy_cmd->add_option("--out", out_dir, "output directory");
  toy_cmd->add_option("--n", toy_n, "sample count (default 600)");
  toy_cmd->add_option("--trials", toy_trials, "trial count (default 5)");
  add_overrides(toy_cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);  // prints the message or help text
    return code == 0 ? 0 : 1;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(config_path, o, out_dir);
    if (eval_cmd->parsed())
      return cmd_evaluate(checkpoint, data_path, header, o);
    if (exp_cmd->parsed()) return cmd_experiment(config_path, o);
    if (hps_cmd->parsed()) return cmd_hps(config_path, o);
    if (sens_cmd->parsed()) return cmd_sensitivity(config_path, o);
    if (toy_cmd->parsed()) return cmd_toy(out_dir, toy_n, toy_trials, o);
  } catch (const TrainingError& e) {
    std::cerr << "training failure: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
