// Acceptance gate: numbered end-to-end checks covering the distribution
// numerics, loss gradients, aggregation arithmetic and desk-scale benchmark
// behaviour of the library. Each check prints exactly one [PASS]/[FAIL] line
// with its measured values and elapsed time; the process exits nonzero if any
// check fails. Checks with a time budget also fail when they run over it.
//
// Usage: acceptance [data-dir]
//
// data-dir is where benchmark tables live (default "data"). The yacht checks
// need data/yacht.csv; when the file is absent they fail with instructions
// instead of being skipped silently.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "oracles.hpp"
#include "piqd/dataset.hpp"
#include "piqd/ensemble.hpp"
#include "piqd/experiment.hpp"
#include "piqd/losses.hpp"
#include "piqd/metrics.hpp"
#include "piqd/mlp.hpp"
#include "piqd/rng.hpp"
#include "piqd/split_normal.hpp"

namespace {

using namespace piqd;
namespace fs = std::filesystem;

// ---- pinned tolerances and targets ----------------------------------------

constexpr double kRoundTripTol = 1e-9;   // |cdf(quantile(p)) - p|
constexpr double kNormalTol = 1e-12;     // split normal vs normal CDF
constexpr double kFitResidualTol = 1e-4; // |cdf(bound) - nominal tail mass|
constexpr double kFitSymmetryTol = 1e-4; // relative sigma1 vs sigma2
constexpr double kMixtureTol = 1e-6;     // mixture quantile vs quadrature
constexpr double kGradRelTol = 1e-4;     // loss gradient vs finite differences
constexpr double kSemTol = 1e-6;         // hand-computed aggregation example

constexpr double kCoverageTarget = 0.95;
constexpr double kCoverageBand = 0.04;   // sinusoid benchmark PICP band

// Reference results for five-member composite-loss ensembles on the yacht
// table at 95% nominal coverage: mean PICP 0.94, mean width 0.12 in
// standardized units. The bands are wide because the search budget here is a
// fraction of a full study's.
constexpr double kYachtPicpLo = 0.90, kYachtPicpHi = 0.99;
constexpr double kYachtMpiwLo = 0.06, kYachtMpiwHi = 0.18;

constexpr double kNarrowerMinFraction = 0.8;  // SNM narrower than SEM

// Time budgets in seconds (0 = unbounded).
constexpr double kBudgetRoundTrip = 1.0;
constexpr double kBudgetNormal = 1.0;
constexpr double kBudgetFit = 5.0;
constexpr double kBudgetMixture = 10.0;
constexpr double kBudgetGradients = 30.0;
constexpr double kBudgetSinusoid = 300.0;
constexpr double kBudgetYacht = 900.0;

// Seeds and salts local to this harness (independent of the library's own
// internal derivations, so the statistical checks do not hinge on them).
constexpr std::uint64_t kToySalt = 0x616363;       // sinusoid protocol loop
constexpr std::uint64_t kRobustMaster = 17;        // robustness splits
constexpr std::uint64_t kRobustSalt = 0x726f62;    // robustness ensembles
constexpr std::uint64_t kYachtMaster = 13;         // yacht trial protocol
constexpr std::uint64_t kYachtHpsSeed = 29;        // yacht search stream

std::string fmt(const char* f, ...) {
  va_list ap;
  va_start(ap, f);
  char buf[768];
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// ---- check runner ----------------------------------------------------------

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void run_check(int id, const char* name, double budget_s,
               const std::function<Outcome()>& fn) {
  auto t0 = std::chrono::steady_clock::now();
  Outcome oc;
  try {
    oc = fn();
  } catch (const std::exception& e) {
    oc.pass = false;
    oc.detail = std::string("unexpected exception: ") + e.what();
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t0)
                    .count();
  bool in_budget = budget_s <= 0.0 || secs < budget_s;
  bool pass = oc.pass && in_budget;
  if (!pass) ++g_failures;
  std::string timing = budget_s > 0.0
                           ? fmt("%.2f s, budget %.0f s", secs, budget_s)
                           : fmt("%.2f s", secs);
  if (oc.pass && !in_budget) oc.detail += " [over time budget]";
  std::printf("[%s] %2d %s: %s (%s)\n", pass ? "PASS" : "FAIL", id, name,
              oc.detail.c_str(), timing.c_str());
  std::fflush(stdout);
}

// ---- checks 1-4: distribution numerics -------------------------------------

Outcome check_round_trip() {
  Rng rng(101);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    double mu = rng.uniform(-10.0, 10.0);
    double s1 = std::exp(rng.uniform(std::log(0.05), std::log(20.0)));
    double s2 = std::exp(rng.uniform(std::log(0.05), std::log(20.0)));
    SplitNormal sn(mu, s1, s2);
    double p = rng.uniform(0.001, 0.999);
    worst = std::max(worst, std::fabs(cdf(sn, quantile(sn, p)) - p));
  }
  return {worst <= kRoundTripTol,
          fmt("max |cdf(quantile(p)) - p| = %.2e over 1000 draws (tol %.0e)",
              worst, kRoundTripTol)};
}

Outcome check_normal_degeneration() {
  Rng rng(202);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    double mu = rng.uniform(-10.0, 10.0);
    double sigma = std::exp(rng.uniform(std::log(0.05), std::log(20.0)));
    double z = rng.uniform(-8.0, 8.0);
    double ours = cdf(SplitNormal(mu, sigma, sigma), mu + z * sigma);
    // Independent oracle: the C library's erfc, not the in-house erf.
    double ref = 0.5 * std::erfc(-z / std::sqrt(2.0));
    worst = std::max(worst, std::fabs(ours - ref));
  }
  return {worst <= kNormalTol,
          fmt("max |cdf - normal CDF| = %.2e over 1000 equal-scale draws "
              "(tol %.0e)",
              worst, kNormalTol)};
}

Outcome check_fit() {
  Rng rng(303);
  const double alpha = 0.05;
  double worst_res = 0.0, worst_sym = 0.0;
  int symmetric = 0;
  for (int i = 0; i < 200; ++i) {
    double point = rng.uniform(-5.0, 5.0);
    double wlo = std::exp(rng.uniform(std::log(0.2), std::log(4.0)));
    bool sym = (i % 4 == 0);
    double whi = sym ? wlo : std::exp(rng.uniform(std::log(0.2), std::log(4.0)));
    FitResult fr = fit(point - wlo, point, point + whi, alpha);
    worst_res = std::max(worst_res,
                         std::fabs(cdf(fr.sn, point - wlo) - alpha / 2.0));
    worst_res = std::max(
        worst_res, std::fabs(cdf(fr.sn, point + whi) - (1.0 - alpha / 2.0)));
    if (sym) {
      ++symmetric;
      double rel = std::fabs(fr.sn.sigma1 - fr.sn.sigma2) /
                   std::max(fr.sn.sigma1, fr.sn.sigma2);
      worst_sym = std::max(worst_sym, rel);
    }
  }
  bool pass = worst_res <= kFitResidualTol && worst_sym <= kFitSymmetryTol;
  return {pass,
          fmt("max tail-mass residual %.2e over 200 triples (tol %.0e); max "
              "scale asymmetry %.2e over %d symmetric triples (tol %.0e)",
              worst_res, kFitResidualTol, worst_sym, symmetric,
              kFitSymmetryTol)};
}

Outcome check_mixture_quantile() {
  Rng rng(404);
  double worst = 0.0;
  for (int c = 0; c < 50; ++c) {
    int m = 1 + static_cast<int>(rng.below(5));
    std::vector<SplitNormal> comps;
    double lo = 1e300, hi = -1e300;
    for (int j = 0; j < m; ++j) {
      double mu = rng.uniform(-2.0, 2.0);
      double s1 = std::exp(rng.uniform(std::log(0.2), std::log(1.0)));
      double s2 = std::exp(rng.uniform(std::log(0.2), std::log(1.0)));
      comps.emplace_back(mu, s1, s2);
      lo = std::min(lo, mu - 7.0 * s1);
      hi = std::max(hi, mu + 7.0 * s2);
    }
    SplitNormalMixture mix(std::move(comps));
    piqd::testing::TrapezoidCdf oracle(
        [&mix](double x) { return mixture_pdf(mix, x); }, lo, hi, 400000);
    double ps[8] = {0.025, 0.25,
                    0.5,   0.75,
                    0.975, rng.uniform(0.01, 0.99),
                    rng.uniform(0.01, 0.99), rng.uniform(0.01, 0.99)};
    for (double p : ps)
      worst =
          std::max(worst, std::fabs(mixture_quantile(mix, p) - oracle.quantile(p)));
  }
  return {worst <= kMixtureTol,
          fmt("max |quantile - quadrature oracle| = %.2e over 50 mixtures x 8 "
              "probabilities (tol %.0e)",
              worst, kMixtureTol)};
}

// ---- check 5: loss gradients against finite differences --------------------

enum LossId {
  kLossWidth = 0,
  kLossCoverage,
  kLossPointError,
  kLossOrdering,
  kLossQuality,
  kLossComposite,
  kLossCount
};

const char* loss_name(int id) {
  switch (id) {
    case kLossWidth: return "captured-width";
    case kLossCoverage: return "coverage-shortfall";
    case kLossPointError: return "point-error";
    case kLossOrdering: return "ordering-penalty";
    case kLossQuality: return "quality-driven";
    default: return "composite";
  }
}

LossOutput eval_loss(int id, std::span<const IntervalPrediction> preds,
                     std::span<const double> ys, const LossParams& lp) {
  switch (id) {
    case kLossWidth: return loss_mpiw_captured(preds, ys);
    case kLossCoverage: return loss_picp(preds, ys, lp.alpha, lp.softness);
    case kLossPointError: return loss_mse(preds, ys);
    case kLossOrdering: return loss_penalty(preds);
    case kLossQuality: return loss_qd(preds, ys, lp);
    default: return loss_qd_plus(preds, ys, lp);
  }
}

Outcome check_gradients() {
  const MlpArch arch{2, 5, 4};
  const std::size_t n = 8;
  LossParams lp;
  lp.alpha = 0.05;
  lp.lambda_qd = 0.05;
  lp.lambda1 = 0.9;
  lp.lambda2 = 0.2;
  lp.xi = 2.0;
  lp.softness = 5.0;  // gentle sigmoid so coverage gradients stay alive

  // Hard indicators and ReLU/hinge kinks pass no gradient exactly at their
  // threshold, where a central difference would straddle the kink. Batches
  // are therefore built with explicit margins: every pre-activation at least
  // kZMargin from zero, every target and every bound pair at least kEdge
  // apart. The finite-difference step moves them by ~1e-5 at most.
  const double kZMargin = 1e-3, kEdge = 2e-2;

  double worst = 0.0;
  int worst_loss = 0, worst_batch = 0;

  for (int b = 0; b < 20; ++b) {
    Rng rng(7100 + 31 * b);
    bool crossed = (b % 3 == 0);  // exercise active ordering penalties

    std::vector<double> xs(n * arch.input_dim);
    for (double& v : xs) v = rng.uniform(-2.0, 2.0);

    std::optional<Mlp> net;
    MlpWorkspace ws;
    std::vector<IntervalPrediction> preds;
    for (int attempt = 0; attempt < 100 && !net; ++attempt) {
      Mlp candidate(arch, 9000 + 1000 * b + attempt);
      auto ps = candidate.parameters();
      for (double& p : ps)
        p += (rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0) *
             rng.uniform(0.05, 0.15);
      if (crossed) {
        // Invert the bound-head biases but keep the inversion shallow: a
        // deeply crossed interval saturates the soft-coverage sigmoids for
        // every possible target, which degenerates both gradient and finite
        // difference to rounding noise.
        std::swap(ps[ps.size() - 3], ps[ps.size() - 1]);
        ps[ps.size() - 3] *= 0.15;
        ps[ps.size() - 1] *= 0.15;
      }
      candidate.forward(xs, n, ws);
      bool ok = true;
      for (double z : ws.z1) ok = ok && std::fabs(z) > kZMargin;
      for (double z : ws.z2) ok = ok && std::fabs(z) > kZMargin;
      if (!ok) continue;
      preds = Mlp::outputs_to_predictions(ws);
      for (const auto& p : preds)
        ok = ok && std::fabs(p.point - p.lower) > kEdge &&
             std::fabs(p.upper - p.point) > kEdge &&
             std::fabs(p.upper - p.lower) > kEdge;
      if (ok) net.emplace(std::move(candidate));
    }
    if (!net)
      return {false, fmt("batch %d: no margin-respecting network found", b)};

    // Targets stay within ~0.6 of a bound (or between inverted bounds), so
    // the soft-coverage sigmoids never saturate to the point where both the
    // analytic gradient and the finite difference degenerate to rounding
    // noise of the same magnitude.
    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = preds[i];
      bool inside_ok = !crossed && p.upper > p.lower;
      for (int t = 0; t < 100; ++t) {
        double y;
        if (inside_ok && i % 10 < 7) {
          y = p.lower + rng.uniform(0.15, 0.85) * (p.upper - p.lower);
        } else if (crossed && rng.uniform(0.0, 1.0) < 0.5) {
          y = p.upper + rng.uniform(0.15, 0.85) * (p.lower - p.upper);
        } else {
          double off = rng.uniform(0.05, 0.6);
          y = rng.uniform(0.0, 1.0) < 0.5
                  ? std::min(p.lower, p.upper) - off
                  : std::max(p.lower, p.upper) + off;
        }
        if (std::fabs(y - p.lower) >= kEdge && std::fabs(y - p.upper) >= kEdge) {
          ys[i] = y;
          break;
        }
      }
    }

    for (int id = 0; id < kLossCount; ++id) {
      net->forward(xs, n, ws);
      preds = Mlp::outputs_to_predictions(ws);
      LossOutput lo = eval_loss(id, preds, ys, lp);
      std::vector<double> grad;
      net->backward(ws, lo.d_lower, lo.d_point, lo.d_upper, grad);

      auto ps = net->parameters();
      std::vector<double> fd(ps.size());
      for (std::size_t k = 0; k < ps.size(); ++k) {
        double orig = ps[k];
        double h = 1e-6 * std::max(1.0, std::fabs(orig));
        ps[k] = orig + h;
        net->forward(xs, n, ws);
        double fp = eval_loss(id, Mlp::outputs_to_predictions(ws), ys, lp).value;
        ps[k] = orig - h;
        net->forward(xs, n, ws);
        double fm = eval_loss(id, Mlp::outputs_to_predictions(ws), ys, lp).value;
        ps[k] = orig;
        fd[k] = (fp - fm) / (2.0 * h);
      }

      double diff2 = 0.0, an2 = 0.0, fd2 = 0.0;
      for (std::size_t k = 0; k < ps.size(); ++k) {
        diff2 += (fd[k] - grad[k]) * (fd[k] - grad[k]);
        an2 += grad[k] * grad[k];
        fd2 += fd[k] * fd[k];
      }
      double rel = std::sqrt(diff2) /
                   std::max({std::sqrt(an2), std::sqrt(fd2), 1e-10});
      if (rel > worst) {
        worst = rel;
        worst_loss = id;
        worst_batch = b;
      }
    }
  }
  return {worst <= kGradRelTol,
          fmt("max relative gradient gap %.2e (loss %s, batch %d) over 6 "
              "losses x 20 batches (tol %.0e)",
              worst, loss_name(worst_loss), worst_batch, kGradRelTol)};
}

// ---- check 6: standard-error aggregation arithmetic -------------------------

Outcome check_sem_arithmetic() {
  const double lowers[5] = {-1.0, -1.0, -1.0, -1.0, -3.0};
  std::vector<IntervalPrediction> members;
  for (double lo : lowers) members.push_back({lo, lo + 1.0, lo + 2.0});
  AggregateNotes notes;
  IntervalPrediction agg = aggregate_sem(members, /*divide_by_sqrt_m=*/true,
                                         &notes);
  // Lower bounds: mean -1.4, sample std sqrt(0.8), standard error 0.4, so the
  // aggregate lower is -1.4 - 1.96 * 0.4 = -2.184. Upper bounds {1,1,1,1,-1}
  // give 0.6 + 1.96 * 0.4 = 1.384; points {0,0,0,0,-2} average to -0.4.
  double e_lower = std::fabs(agg.lower - (-2.184));
  double e_upper = std::fabs(agg.upper - 1.384);
  double e_point = std::fabs(agg.point - (-0.4));
  bool pass = e_lower <= kSemTol && e_upper <= kSemTol && e_point <= kSemTol &&
              notes.clamped_points == 0;
  return {pass,
          fmt("lower %.6f (expected -2.184, err %.1e), upper %.6f, point %.6f "
              "(tol %.0e)",
              agg.lower, e_lower, agg.upper, agg.point, kSemTol)};
}

// ---- checks 7-11: desk-scale benchmark behaviour ----------------------------

struct ToyRun {
  std::vector<double> picp_snm, mpiw_snm, mpiw_sem;
  double outer_width = 0.0, inner_width = 0.0;
  long crossings = 0, point_outside = 0;
  long prediction_sets = 0;  // held-out predictions counted toward integrity
  long total_retries = 0;
};

struct BenchmarkPrep {
  Dataset data;
  Standardizer full_stats;
  double target_range = 0.0;
};

BenchmarkPrep prep_full_scope(Dataset data) {
  BenchmarkPrep bp{std::move(data), {}, 0.0};
  bp.full_stats = compute_stats(bp.data);
  Dataset full_std = standardize(bp.data, bp.full_stats);
  auto [lo, hi] = std::minmax_element(full_std.y.begin(), full_std.y.end());
  bp.target_range = *hi - *lo;
  return bp;
}

IntervalPrediction to_full_scope(IntervalPrediction p, const Standardizer& st,
                                 const Standardizer& full) {
  return {rescale_target(p.lower, st, full), rescale_target(p.point, st, full),
          rescale_target(p.upper, st, full)};
}

// Shuffled-trial protocol on the sinusoid benchmark: five ensembles, each
// scored on its held-out split with both aggregation modes built from the
// same trained members. Evaluation is in full-dataset standardized units.
ToyRun run_toy_protocol(int workers) {
  ToyRun out;
  BenchmarkPrep bp = prep_full_scope(
      make_sinusoid(kSinusoidSamples, kSinusoidDataSeed));
  ExperimentConfig cfg = sinusoid_experiment_config();
  const double alpha = cfg.ensemble.train.loss_params.alpha;

  auto splits = make_trials(bp.data.n, cfg.protocol.trials,
                            cfg.protocol.test_fraction,
                            cfg.protocol.master_seed);
  std::vector<double> xs_pool, w_pool;
  for (const TrialSplit& sp : splits) {
    Dataset tr = subset(bp.data, sp.train_idx);
    Dataset te = subset(bp.data, sp.test_idx);
    Standardizer st = compute_stats(tr);
    Dataset trs = standardize(tr, st);
    Dataset tes = standardize(te, st);

    EnsembleConfig ec = cfg.ensemble;
    ec.arch.input_dim = static_cast<int>(bp.data.d);
    ec.train.seed = derive_seed(cfg.protocol.master_seed,
                                static_cast<std::uint64_t>(sp.trial), kToySalt);
    RetryStats rs;
    Ensemble ens = train_ensemble(DataView{trs.x, trs.y, trs.n, trs.d}, ec,
                                  &rs, workers);
    out.total_retries += rs.total_retries;

    std::vector<double> ys(te.n);
    for (std::size_t i = 0; i < te.n; ++i)
      ys[i] = bp.full_stats.standardize_y(te.y[i]);

    auto score = [&](Aggregation agg) {
      PredictOutput po = predict(ens, tes.x, tes.n, agg, alpha, ec, workers);
      std::vector<IntervalPrediction> preds = std::move(po.aggregated);
      for (auto& p : preds) p = to_full_scope(p, st, bp.full_stats);
      EvalReport rep = evaluate(preds, ys, bp.target_range);
      return std::pair(std::move(preds), rep);
    };
    auto [snm_preds, snm_rep] = score(Aggregation::kSnm);
    auto [sem_preds, sem_rep] = score(Aggregation::kSem);
    (void)sem_preds;

    out.picp_snm.push_back(snm_rep.picp);
    out.mpiw_snm.push_back(snm_rep.mpiw);
    out.mpiw_sem.push_back(sem_rep.mpiw);
    out.crossings += snm_rep.crossings + sem_rep.crossings;
    out.point_outside += snm_rep.point_outside + sem_rep.point_outside;
    out.prediction_sets += 2 * static_cast<long>(te.n);
    for (std::size_t i = 0; i < te.n; ++i) {
      xs_pool.push_back(te.x[i]);  // one feature column on this benchmark
      w_pool.push_back(snm_preds[i].upper - snm_preds[i].lower);
    }
  }

  std::vector<double> sorted_x = xs_pool;
  std::sort(sorted_x.begin(), sorted_x.end());
  double q25 = sorted_x[sorted_x.size() / 4];
  double q75 = sorted_x[(3 * sorted_x.size()) / 4];
  double inner = 0.0, outer = 0.0;
  long n_in = 0, n_out = 0;
  for (std::size_t i = 0; i < xs_pool.size(); ++i) {
    if (xs_pool[i] < q25 || xs_pool[i] > q75) {
      outer += w_pool[i];
      ++n_out;
    } else {
      inner += w_pool[i];
      ++n_in;
    }
  }
  out.outer_width = n_out > 0 ? outer / static_cast<double>(n_out) : 0.0;
  out.inner_width = n_in > 0 ? inner / static_cast<double>(n_in) : 0.0;
  return out;
}

struct YachtRun {
  bool data_present = false;
  std::string missing_note;
  ExperimentResult result;
  double best_lr = 0.0;
  int best_epochs = 0;
  int ok_trials = 0, snm_narrower = 0;
  long crossings = 0, point_outside = 0, prediction_sets = 0;
};

YachtRun run_yacht_protocol(const fs::path& data_dir, int workers) {
  YachtRun out;
  fs::path csv = data_dir / "yacht.csv";
  if (!fs::exists(csv)) {
    out.missing_note = fmt(
        "dataset not found at %s; install the yacht hydrodynamics table "
        "there as headerless CSV (308 rows: 6 feature columns, then the "
        "residuary-resistance target) and re-run -- see README, section "
        "\"Benchmark data\"",
        csv.string().c_str());
    return out;
  }
  out.data_present = true;
  Dataset yacht = load_csv(csv.string(), /*has_header=*/false);
  yacht.name = "yacht";
  fs::path manifest = data_dir / "yacht.manifest";
  if (fs::exists(manifest))
    validate_against_manifest(yacht, load_manifest(manifest.string()));

  ExperimentConfig cfg;
  cfg.model = ModelKind::kQdPlus;
  cfg.protocol.trials = 5;
  cfg.protocol.test_fraction = 0.1;
  cfg.protocol.master_seed = kYachtMaster;
  cfg.aggregations = {Aggregation::kSnm, Aggregation::kSem};
  cfg.workers = workers;
  cfg.ensemble.members = 5;
  cfg.ensemble.retry_limit = 2;
  cfg.ensemble.arch = MlpArch{static_cast<int>(yacht.d), 50, 50};
  cfg.ensemble.train.batch_size = 100;
  cfg.ensemble.train.loss_params.alpha = 0.05;
  cfg.ensemble.train.loss_params.xi = 10.0;
  cfg.ensemble.train.loss_params.softness = 160.0;

  // Reduced-budget random search on the training part of one shuffled split
  // (the held-out tenth never enters the search), scored on five 90/10
  // validation folds.
  TrialSplit sp0 = make_trials(yacht.n, 1, cfg.protocol.test_fraction,
                               cfg.protocol.master_seed)[0];
  Dataset search_data = subset(yacht, sp0.train_idx);
  HpsSpace space;
  space.samples = 24;
  space.learning_rate = {5e-3, 0.06};
  space.decay_rate = {0.99, 1.0};
  space.lambda1 = {0.9, 0.99};
  space.lambda2 = {0.02, 0.3};
  space.epochs_lo = 150;
  space.epochs_hi = 600;
  HpsResult hps = run_hps(search_data, space, cfg, kYachtHpsSeed);
  apply_candidate(cfg, hps.best);
  out.best_lr = hps.best.learning_rate;
  out.best_epochs = hps.best.epochs;

  out.result = run_experiment(yacht, cfg);
  for (const TrialOutcome& t : out.result.trials) {
    if (t.failed) continue;
    ++out.ok_trials;
    if (t.by_aggregation[0].mpiw < t.by_aggregation[1].mpiw)
      ++out.snm_narrower;
    for (const EvalReport& rep : t.by_aggregation) {
      out.crossings += rep.crossings;
      out.point_outside += rep.point_outside;
      out.prediction_sets += rep.n;
    }
  }
  return out;
}

struct RobustRun {
  long composite_events = 0;  // retries + exhausted members, composite loss
  long quality_events = 0;    // same under the plain quality-driven loss
  int trainings = 0;
  long crossings = 0, point_outside = 0, prediction_sets = 0;
  int grid_cells_per_xi = 0;
  int failed_xi0 = 0, failed_xi10 = 0;
};

// Twenty ensembles per loss on fresh shuffled splits, identical budgets and
// seeds; then a single-network sensitivity grid with the ordering penalty
// switched off and on.
RobustRun run_robustness(int workers) {
  RobustRun out;
  BenchmarkPrep bp = prep_full_scope(
      make_sinusoid(kSinusoidSamples, kSinusoidDataSeed));
  ExperimentConfig cfg = sinusoid_experiment_config();
  // A step size above the benchmark default, shared by both losses, so the
  // fragility contrast is statistically comfortable: at 0.03 the plain
  // quality-driven loss needs a handful of retries over 100 network
  // trainings while the composite loss stays clean (it still does at twice
  // this rate).
  cfg.ensemble.train.learning_rate = 0.03;
  const double alpha = cfg.ensemble.train.loss_params.alpha;

  auto splits = make_trials(bp.data.n, 20, 0.1, kRobustMaster);
  out.trainings = static_cast<int>(splits.size());
  for (const TrialSplit& sp : splits) {
    Dataset tr = subset(bp.data, sp.train_idx);
    Dataset te = subset(bp.data, sp.test_idx);
    Standardizer st = compute_stats(tr);
    Dataset trs = standardize(tr, st);
    Dataset tes = standardize(te, st);
    DataView tv{trs.x, trs.y, trs.n, trs.d};

    for (ModelKind kind : {ModelKind::kQdPlus, ModelKind::kQd}) {
      EnsembleConfig ec = cfg.ensemble;
      ec.arch.input_dim = static_cast<int>(bp.data.d);
      ec.train.loss = loss_for(kind);
      ec.point_policy = policy_for(kind);
      ec.train.seed = derive_seed(kRobustMaster,
                                  static_cast<std::uint64_t>(sp.trial),
                                  kRobustSalt);
      RetryStats rs;
      std::optional<Ensemble> ens;
      try {
        ens.emplace(train_ensemble(tv, ec, &rs, workers));
      } catch (const TrainingError&) {
        // Retry bookkeeping is not filled on a throw; an exhausted member
        // means at least retry_limit + 1 failed attempts.
      }
      long events = ens ? rs.total_retries
                        : static_cast<long>(ec.retry_limit) + 1;
      if (kind == ModelKind::kQdPlus) {
        out.composite_events += events;
        if (ens) {
          PredictOutput po =
              predict(*ens, tes.x, tes.n, Aggregation::kSnm, alpha, ec,
                      workers);
          std::vector<double> ys(te.n);
          for (std::size_t i = 0; i < te.n; ++i)
            ys[i] = bp.full_stats.standardize_y(te.y[i]);
          for (auto& p : po.aggregated)
            p = to_full_scope(p, st, bp.full_stats);
          EvalReport rep = evaluate(po.aggregated, ys, bp.target_range);
          out.crossings += rep.crossings;
          out.point_outside += rep.point_outside;
          out.prediction_sets += rep.n;
        }
      } else {
        out.quality_events += events;
      }
    }
  }

  // Grid chosen so the two penalty settings separate cleanly at the
  // benchmark step size: with the ordering penalty off, training collapses
  // everywhere the coverage weight is moderate; with it on, every cell
  // trains.
  const double l1_grid[] = {0.5, 0.7, 0.9};
  const double l2_grid[] = {0.01, 0.05, 0.1};
  const double xi_values[] = {0.0, 10.0};
  ExperimentConfig base = sinusoid_experiment_config();
  base.workers = workers;
  auto cells = run_sensitivity(bp.data, l1_grid, l2_grid, xi_values, base);
  out.grid_cells_per_xi = static_cast<int>(std::size(l1_grid) *
                                           std::size(l2_grid));
  for (const SensitivityCell& c : cells) {
    if (!c.failed) continue;
    if (c.xi == 0.0)
      ++out.failed_xi0;
    else
      ++out.failed_xi10;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  fs::path data_dir = argc > 1 ? argv[1] : "data";
  unsigned hc = std::thread::hardware_concurrency();
  int workers = static_cast<int>(std::clamp(hc, 1u, 8u));
  std::printf("acceptance checks | data dir: %s | workers: %d\n",
              data_dir.string().c_str(), workers);
  std::fflush(stdout);

  run_check(1, "split-normal quantile/cdf round trip", kBudgetRoundTrip,
            check_round_trip);
  run_check(2, "equal-scale split normal matches the normal CDF",
            kBudgetNormal, check_normal_degeneration);
  run_check(3, "interval-to-split-normal fit accuracy", kBudgetFit, check_fit);
  run_check(4, "mixture quantile vs quadrature oracle", kBudgetMixture,
            check_mixture_quantile);
  run_check(5, "loss gradients vs finite differences", kBudgetGradients,
            check_gradients);
  run_check(6, "standard-error aggregation arithmetic", 0.0,
            check_sem_arithmetic);

  std::optional<ToyRun> toy;
  run_check(7, "sinusoid benchmark: coverage and width shape", kBudgetSinusoid,
            [&]() -> Outcome {
              toy = run_toy_protocol(workers);
              double mean_picp = mean_of(toy->picp_snm);
              bool in_band =
                  std::fabs(mean_picp - kCoverageTarget) <= kCoverageBand;
              bool widening = toy->outer_width > toy->inner_width;
              return {in_band && widening,
                      fmt("mean held-out SNM PICP %.3f (target %.2f +/- %.2f); "
                          "outer-quartile width %.3f vs inner %.3f over %d "
                          "trials",
                          mean_picp, kCoverageTarget, kCoverageBand,
                          toy->outer_width, toy->inner_width,
                          static_cast<int>(toy->picp_snm.size()))};
            });

  YachtRun yacht;
  run_check(8, "yacht benchmark: coverage and width", kBudgetYacht,
            [&]() -> Outcome {
              yacht = run_yacht_protocol(data_dir, workers);
              if (!yacht.data_present) return {false, yacht.missing_note};
              const SummaryRow& snm = yacht.result.summary[0];
              bool picp_ok = snm.picp.mean >= kYachtPicpLo &&
                             snm.picp.mean <= kYachtPicpHi;
              bool mpiw_ok = snm.mpiw.mean >= kYachtMpiwLo &&
                             snm.mpiw.mean <= kYachtMpiwHi;
              return {picp_ok && mpiw_ok && yacht.ok_trials > 0,
                      fmt("SNM PICP %.3f (band [%.2f, %.2f]), MPIW %.3f (band "
                          "[%.2f, %.2f]); %d/5 trials ok; searched lr %.4g, "
                          "%d epochs",
                          snm.picp.mean, kYachtPicpLo, kYachtPicpHi,
                          snm.mpiw.mean, kYachtMpiwLo, kYachtMpiwHi,
                          yacht.ok_trials, yacht.best_lr, yacht.best_epochs)};
            });

  run_check(9, "mixture aggregation narrower than standard-error baseline",
            0.0, [&]() -> Outcome {
              if (!toy) return {false, "sinusoid protocol unavailable"};
              int toy_n = static_cast<int>(toy->mpiw_snm.size());
              int toy_narrower = 0;
              for (int t = 0; t < toy_n; ++t)
                if (toy->mpiw_snm[t] < toy->mpiw_sem[t]) ++toy_narrower;
              bool toy_ok = toy_narrower >=
                            static_cast<int>(std::ceil(kNarrowerMinFraction *
                                                       toy_n));
              std::string detail = fmt("sinusoid: %d/%d trials narrower",
                                       toy_narrower, toy_n);
              if (!yacht.data_present) {
                detail += "; yacht: not evaluated (" + yacht.missing_note + ")";
                return {false, detail};
              }
              bool yacht_ok =
                  yacht.ok_trials > 0 &&
                  yacht.snm_narrower >=
                      static_cast<int>(std::ceil(kNarrowerMinFraction *
                                                 yacht.ok_trials));
              detail += fmt("; yacht: %d/%d trials narrower (need >= %.0f%%)",
                            yacht.snm_narrower, yacht.ok_trials,
                            kNarrowerMinFraction * 100.0);
              return {toy_ok && yacht_ok, detail};
            });

  std::optional<RobustRun> robust;
  run_check(10, "composite loss robustness vs plain quality-driven loss", 0.0,
            [&]() -> Outcome {
              robust = run_robustness(workers);
              bool contrast = robust->composite_events == 0 &&
                              robust->quality_events >= 1;
              bool grid = robust->failed_xi0 > robust->failed_xi10;
              return {contrast && grid,
                      fmt("failures+retries over %d ensemble trainings: "
                          "composite %ld vs quality-driven %ld; grid failures "
                          "%d/%d without ordering penalty vs %d/%d with it",
                          robust->trainings, robust->composite_events,
                          robust->quality_events, robust->failed_xi0,
                          robust->grid_cells_per_xi, robust->failed_xi10,
                          robust->grid_cells_per_xi)};
            });

  run_check(11, "ordering integrity of aggregated predictions", 0.0,
            [&]() -> Outcome {
              if (!toy || !robust)
                return {false, "benchmark protocols unavailable"};
              long cross = toy->crossings + robust->crossings;
              long outside = toy->point_outside + robust->point_outside;
              long sets = toy->prediction_sets + robust->prediction_sets;
              std::string scope = "sinusoid protocol + robustness runs";
              if (yacht.data_present && yacht.ok_trials > 0) {
                cross += yacht.crossings;
                outside += yacht.point_outside;
                sets += yacht.prediction_sets;
                scope += " + yacht trials";
              }
              return {cross == 0 && outside == 0,
                      fmt("%ld crossings, %ld points outside across %ld "
                          "held-out predictions (%s)",
                          cross, outside, sets, scope.c_str())};
            });

  std::printf("acceptance: %d/11 checks passed\n", 11 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
