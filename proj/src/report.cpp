#include "piqd/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace piqd {

namespace {

using nlohmann::json;

const double kNaN = std::numeric_limits<double>::quiet_NaN();

// NaN has no JSON literal; travel as null.
json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double jget(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

std::string fixed(double v, int decimals) {
  if (std::isnan(v)) return "-";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string pm(const MetricSummary& s, int decimals) {
  if (std::isnan(s.mean)) return "-";
  std::string out = fixed(s.mean, decimals) + " +/- ";
  out += std::isnan(s.sem) ? "NA" : fixed(s.sem, decimals);
  return out;
}

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json report_to_json(const EvalReport& r) {
  return json{{"picp", jnum(r.picp)},
              {"mpiw", jnum(r.mpiw)},
              {"nmpiw", jnum(r.nmpiw)},
              {"mse", jnum(r.mse)},
              {"n", r.n},
              {"crossings", r.crossings},
              {"point_outside", r.point_outside},
              {"target_range", jnum(r.target_range)}};
}

EvalReport report_from_json(const json& j) {
  EvalReport r;
  r.picp = jget(j.at("picp"));
  r.mpiw = jget(j.at("mpiw"));
  r.nmpiw = jget(j.at("nmpiw"));
  r.mse = jget(j.at("mse"));
  r.n = j.at("n").get<long>();
  r.crossings = j.at("crossings").get<long>();
  r.point_outside = j.at("point_outside").get<long>();
  r.target_range = jget(j.at("target_range"));
  return r;
}

json summary_to_json(const SummaryRow& s) {
  auto ms = [](const MetricSummary& m) {
    return json{{"mean", jnum(m.mean)}, {"sem", jnum(m.sem)}};
  };
  return json{{"picp", ms(s.picp)},
              {"mpiw", ms(s.mpiw)},
              {"nmpiw", ms(s.nmpiw)},
              {"mse", ms(s.mse)}};
}

SummaryRow summary_from_json(const json& j) {
  auto ms = [](const json& m) {
    return MetricSummary{jget(m.at("mean")), jget(m.at("sem"))};
  };
  return SummaryRow{ms(j.at("picp")), ms(j.at("mpiw")), ms(j.at("nmpiw")),
                    ms(j.at("mse"))};
}

std::string render_table(const ExperimentResult& r) {
  std::ostringstream os;
  os << "dataset: " << r.dataset_name << "   model: " << to_string(r.model)
     << "   trials: " << r.trials_requested << " (" << r.trials_failed
     << " failed)   retries: " << r.total_retries << "\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %-16s %-16s %-16s %-16s\n",
                "aggregation", "PICP", "MPIW", "NMPIW", "MSE");
  os << line;
  for (std::size_t a = 0; a < r.aggregations.size(); ++a) {
    const SummaryRow& s = r.summary[a];
    std::snprintf(line, sizeof line, "%-14s %-16s %-16s %-16s %-16s\n",
                  to_string(r.aggregations[a]), pm(s.picp, 2).c_str(),
                  pm(s.mpiw, 2).c_str(), pm(s.nmpiw, 2).c_str(),
                  pm(s.mse, 3).c_str());
    os << line;
  }
  if (r.member_level_eval) {
    const SummaryRow& s = r.member_level_summary;
    std::snprintf(line, sizeof line, "%-14s %-16s %-16s %-16s %-16s\n",
                  "members", pm(s.picp, 2).c_str(), pm(s.mpiw, 2).c_str(),
                  pm(s.nmpiw, 2).c_str(), pm(s.mse, 3).c_str());
    os << line;
  }
  return os.str();
}

std::string render_json(const ExperimentResult& r) {
  json j;
  j["dataset"] = r.dataset_name;
  j["model"] = to_string(r.model);
  j["aggregations"] = json::array();
  for (Aggregation a : r.aggregations)
    j["aggregations"].push_back(to_string(a));
  j["member_level_eval"] = r.member_level_eval;
  j["trials_requested"] = r.trials_requested;
  j["trials_failed"] = r.trials_failed;
  j["total_retries"] = r.total_retries;
  j["target_range"] = jnum(r.target_range);
  j["trials"] = json::array();
  for (const auto& t : r.trials) {
    json jt{{"trial", t.trial},
            {"failed", t.failed},
            {"failure_reason", t.failure_reason},
            {"retries", t.retries},
            {"snm_skipped", t.snm_skipped},
            {"sem_clamped", t.sem_clamped},
            {"fallback_samples", t.fallback_samples}};
    jt["by_aggregation"] = json::array();
    for (const auto& rep : t.by_aggregation)
      jt["by_aggregation"].push_back(report_to_json(rep));
    if (r.member_level_eval) jt["member_level"] = report_to_json(t.member_level);
    j["trials"].push_back(std::move(jt));
  }
  j["summary"] = json::array();
  for (const auto& s : r.summary) j["summary"].push_back(summary_to_json(s));
  if (r.member_level_eval)
    j["member_level_summary"] = summary_to_json(r.member_level_summary);
  return j.dump(2) + "\n";
}

std::string render_csv(const ExperimentResult& r) {
  std::ostringstream os;
  os << "dataset,model,aggregation,trial,failed,picp,mpiw,nmpiw,mse,n,"
        "crossings,point_outside,retries\n";
  auto row = [&](const char* agg, const std::string& trial,
                 const EvalReport& rep, bool failed, int retries) {
    os << r.dataset_name << ',' << to_string(r.model) << ',' << agg << ','
       << trial << ',' << (failed ? 1 : 0) << ',' << g17(rep.picp) << ','
       << g17(rep.mpiw) << ',' << g17(rep.nmpiw) << ',' << g17(rep.mse) << ','
       << rep.n << ',' << rep.crossings << ',' << rep.point_outside << ','
       << retries << '\n';
  };
  for (const auto& t : r.trials) {
    if (t.failed) {
      os << r.dataset_name << ',' << to_string(r.model) << ",-,"
         << t.trial << ",1,,,,,,,," << t.retries << '\n';
      continue;
    }
    for (std::size_t a = 0; a < r.aggregations.size(); ++a)
      row(to_string(r.aggregations[a]), std::to_string(t.trial),
          t.by_aggregation[a], false, t.retries);
    if (r.member_level_eval)
      row("members", std::to_string(t.trial), t.member_level, false,
          t.retries);
  }
  for (std::size_t a = 0; a < r.aggregations.size(); ++a) {
    const SummaryRow& s = r.summary[a];
    os << r.dataset_name << ',' << to_string(r.model) << ','
       << to_string(r.aggregations[a]) << ",mean,0," << g17(s.picp.mean) << ','
       << g17(s.mpiw.mean) << ',' << g17(s.nmpiw.mean) << ','
       << g17(s.mse.mean) << ",,,," << '\n';
    os << r.dataset_name << ',' << to_string(r.model) << ','
       << to_string(r.aggregations[a]) << ",sem,0," << g17(s.picp.sem) << ','
       << g17(s.mpiw.sem) << ',' << g17(s.nmpiw.sem) << ',' << g17(s.mse.sem)
       << ",,,," << '\n';
  }
  return os.str();
}

}  // namespace

std::string render_report(const ExperimentResult& result,
                          ReportFormat format) {
  switch (format) {
    case ReportFormat::kTable:
      return render_table(result);
    case ReportFormat::kJson:
      return render_json(result);
    case ReportFormat::kCsv:
      return render_csv(result);
  }
  throw std::logic_error("render_report: unknown format");
}

void write_report(const ExperimentResult& result, ReportFormat format,
                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_report: cannot open " + path);
  out << render_report(result, format);
  if (!out) throw IoError("write_report: write failed for " + path);
}

namespace {

ExperimentResult parse_report_fields(const json& j) {
  ExperimentResult r;
  r.dataset_name = j.at("dataset").get<std::string>();
  r.model = model_kind_from_string(j.at("model").get<std::string>());
  for (const auto& a : j.at("aggregations"))
    r.aggregations.push_back(aggregation_from_string(a.get<std::string>()));
  r.member_level_eval = j.at("member_level_eval").get<bool>();
  r.trials_requested = j.at("trials_requested").get<int>();
  r.trials_failed = j.at("trials_failed").get<int>();
  r.total_retries = j.at("total_retries").get<long>();
  r.target_range = jget(j.at("target_range"));
  for (const auto& jt : j.at("trials")) {
    TrialOutcome t;
    t.trial = jt.at("trial").get<int>();
    t.failed = jt.at("failed").get<bool>();
    t.failure_reason = jt.at("failure_reason").get<std::string>();
    t.retries = jt.at("retries").get<int>();
    t.snm_skipped = jt.at("snm_skipped").get<long>();
    t.sem_clamped = jt.at("sem_clamped").get<long>();
    t.fallback_samples = jt.at("fallback_samples").get<long>();
    for (const auto& rep : jt.at("by_aggregation"))
      t.by_aggregation.push_back(report_from_json(rep));
    if (r.member_level_eval)
      t.member_level = report_from_json(jt.at("member_level"));
    r.trials.push_back(std::move(t));
  }
  for (const auto& s : j.at("summary"))
    r.summary.push_back(summary_from_json(s));
  if (r.member_level_eval)
    r.member_level_summary = summary_from_json(j.at("member_level_summary"));
  return r;
}

}  // namespace

ExperimentResult parse_report_json(const std::string& text) {
  try {
    return parse_report_fields(json::parse(text));
  } catch (const json::exception& e) {
    throw ParseError(std::string("parse_report_json: ") + e.what());
  }
}

namespace {

bool deq(double a, double b) {
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

bool eval_eq(const EvalReport& a, const EvalReport& b) {
  return deq(a.picp, b.picp) && deq(a.mpiw, b.mpiw) && deq(a.nmpiw, b.nmpiw) &&
         deq(a.mse, b.mse) && a.n == b.n && a.crossings == b.crossings &&
         a.point_outside == b.point_outside &&
         deq(a.target_range, b.target_range);
}

bool summary_eq(const SummaryRow& a, const SummaryRow& b) {
  auto ms = [](const MetricSummary& x, const MetricSummary& y) {
    return deq(x.mean, y.mean) && deq(x.sem, y.sem);
  };
  return ms(a.picp, b.picp) && ms(a.mpiw, b.mpiw) && ms(a.nmpiw, b.nmpiw) &&
         ms(a.mse, b.mse);
}

}  // namespace

bool reports_equal(const ExperimentResult& a, const ExperimentResult& b) {
  if (a.dataset_name != b.dataset_name || a.model != b.model ||
      a.aggregations != b.aggregations ||
      a.member_level_eval != b.member_level_eval ||
      a.trials_requested != b.trials_requested ||
      a.trials_failed != b.trials_failed ||
      a.total_retries != b.total_retries ||
      !deq(a.target_range, b.target_range) ||
      a.trials.size() != b.trials.size() ||
      a.summary.size() != b.summary.size())
    return false;
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    const TrialOutcome& x = a.trials[i];
    const TrialOutcome& y = b.trials[i];
    if (x.trial != y.trial || x.failed != y.failed ||
        x.failure_reason != y.failure_reason || x.retries != y.retries ||
        x.snm_skipped != y.snm_skipped || x.sem_clamped != y.sem_clamped ||
        x.fallback_samples != y.fallback_samples ||
        x.by_aggregation.size() != y.by_aggregation.size())
      return false;
    for (std::size_t k = 0; k < x.by_aggregation.size(); ++k)
      if (!eval_eq(x.by_aggregation[k], y.by_aggregation[k])) return false;
    if (a.member_level_eval && !eval_eq(x.member_level, y.member_level))
      return false;
  }
  for (std::size_t k = 0; k < a.summary.size(); ++k)
    if (!summary_eq(a.summary[k], b.summary[k])) return false;
  if (a.member_level_eval &&
      !summary_eq(a.member_level_summary, b.member_level_summary))
    return false;
  return true;
}

void write_plot_data(std::span<const double> x,
                     std::span<const IntervalPrediction> preds,
                     std::span<const double> y_true, const std::string& path) {
  if (x.empty() || x.size() != preds.size() || x.size() != y_true.size())
    throw std::invalid_argument("write_plot_data: inconsistent inputs");
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::ofstream out(path);
  if (!out) throw IoError("write_plot_data: cannot open " + path);
  out << "# x\tlower\tpoint\tupper\ty_true\n";
  for (std::size_t i : order) {
    out << g17(x[i]) << '\t' << g17(preds[i].lower) << '\t'
        << g17(preds[i].point) << '\t' << g17(preds[i].upper) << '\t'
        << g17(y_true[i]) << '\n';
  }
  if (!out)
    throw IoError("write_plot_data: write failed for " + path);
}

}  // namespace piqd
