#pragma once

// Rendering of experiment results: human-readable table, machine-readable
// JSON (lossless round trip), flat CSV, plus gnuplot-friendly interval dumps
// for 1-D data.

#include <span>
#include <string>

#include "piqd/experiment.hpp"
#include "piqd/metrics.hpp"

namespace piqd {

enum class ReportFormat { kTable, kJson, kCsv };

std::string render_report(const ExperimentResult& result, ReportFormat format);
void write_report(const ExperimentResult& result, ReportFormat format,
                  const std::string& path);

// Inverse of render_report(kJson); used to prove the machine format carries
// the full result. Throws ParseError on malformed input.
ExperimentResult parse_report_json(const std::string& text);

// Field-for-field equality (bitwise on doubles, NaN == NaN).
bool reports_equal(const ExperimentResult& a, const ExperimentResult& b);

// Tab-separated columns x, lower, point, upper, y_true sorted by x, for
// plotting 1-D fits. All spans must have equal non-zero length.
void write_plot_data(std::span<const double> x,
                     std::span<const IntervalPrediction> preds,
                     std::span<const double> y_true, const std::string& path);

}  // namespace piqd
