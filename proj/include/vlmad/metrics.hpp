#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vlmad/core_types.hpp"

namespace vlmad {

// A metric value or the UNDEFINED sentinel (curve does not exist, e.g. a
// single-class category). Never silently 0 or NaN.
class MetricValue {
 public:
  static MetricValue Undefined() { return MetricValue(); }
  explicit MetricValue(double v) : value_(v) {}

  bool defined() const { return value_.has_value(); }
  // Throws kInvalidArgument when undefined.
  double value() const;
  // Fixed-point with `digits` decimals, or "n/a".
  std::string Render(int digits) const;

  bool operator==(const MetricValue&) const = default;

 private:
  MetricValue() = default;
  std::optional<double> value_;
};

struct ScoredLabel {
  double score = 0.0;
  Label label = 0;
};

// (TP + TN) / N. Throws kLengthMismatch / kEmpty.
double Accuracy(std::span<const Label> predictions, std::span<const Label> labels);

// Area under the ROC curve by the trapezoidal rule, tied scores forming one
// threshold step. Equal to the Mann-Whitney statistic with ties counted 1/2.
// UNDEFINED when either class is absent; throws kEmpty on empty input.
MetricValue Auroc(std::span<const ScoredLabel> data);

// Average precision: sum over descending-score blocks of tied scores of
// (recall gained in the block) x (precision counting the whole block).
// UNDEFINED when there is no positive; throws kEmpty on empty input.
MetricValue Aupr(std::span<const ScoredLabel> data);

struct CategoryRow {
  std::string category;
  MetricValue acc = MetricValue::Undefined();
  MetricValue auroc = MetricValue::Undefined();
  MetricValue aupr = MetricValue::Undefined();
  std::size_t n = 0;
  std::size_t unparseable = 0;
};

struct MetricsReport {
  std::string backend_id;
  std::string strategy_id;
  std::vector<CategoryRow> rows;  // lexicographic by category
  CategoryRow average;            // unweighted over categories
  // Human-readable remarks, e.g. which categories were excluded from an
  // average because their value was UNDEFINED.
  std::vector<std::string> notes;

  const CategoryRow* Find(std::string_view category) const;
};

// Groups records by category. `unparseable` adds per-category tallies of
// excluded responses (categories appearing only there get an all-n/a row).
// Records must share one backend and strategy. Throws kEmpty.
MetricsReport PerCategoryReport(
    std::span<const EvalRecord> records,
    const std::map<std::string, std::size_t>& unparseable = {});

// Columns: category,acc,auroc,aupr,n,unparseable (6 decimals, "n/a").
std::string ReportToCsv(const MetricsReport& report);

// One table per report, header | Category | ACC | AUROC | AUPR |, 3 decimals.
std::string ReportsToMarkdown(std::span<const MetricsReport> reports);

}  // namespace vlmad
