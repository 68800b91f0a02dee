#include "vlmad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vlmad/error.hpp"
#include "vlmad/io.hpp"

namespace vlmad {

double MetricValue::value() const {
  if (!value_) throw Error(ErrorCode::kInvalidArgument, "metric is UNDEFINED");
  return *value_;
}

std::string MetricValue::Render(int digits) const {
  return value_ ? FormatFixed(*value_, digits) : std::string("n/a");
}

double Accuracy(std::span<const Label> predictions, std::span<const Label> labels) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "predictions and labels differ in length");
  }
  if (predictions.empty()) throw Error(ErrorCode::kEmpty, "no predictions");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!IsBinaryLabel(predictions[i]) || !IsBinaryLabel(labels[i])) {
      throw Error(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
    }
    correct += predictions[i] == labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

namespace {

struct Block {
  std::uint64_t pos = 0;
  std::uint64_t neg = 0;
};

// Tied-score blocks in descending score order.
std::vector<Block> DescendingBlocks(std::span<const ScoredLabel> data) {
  if (data.empty()) throw Error(ErrorCode::kEmpty, "no scored labels");
  std::vector<ScoredLabel> sorted(data.begin(), data.end());
  for (const auto& d : sorted) {
    if (!std::isfinite(d.score)) {
      throw Error(ErrorCode::kInvalidArgument, "scores must be finite");
    }
    if (!IsBinaryLabel(d.label)) {
      throw Error(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
    }
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredLabel& a, const ScoredLabel& b) { return a.score > b.score; });
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < sorted.size();) {
    Block b;
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].score == sorted[i].score) {
      (sorted[j].label == 1 ? b.pos : b.neg) += 1;
      ++j;
    }
    blocks.push_back(b);
    i = j;
  }
  return blocks;
}

}  // namespace

MetricValue Auroc(std::span<const ScoredLabel> data) {
  const auto blocks = DescendingBlocks(data);
  std::uint64_t total_pos = 0, total_neg = 0;
  for (const auto& b : blocks) {
    total_pos += b.pos;
    total_neg += b.neg;
  }
  if (total_pos == 0 || total_neg == 0) return MetricValue::Undefined();
  // Twice the trapezoid area in (FP, TP) count units; exact in integers.
  std::uint64_t twice_area = 0;
  std::uint64_t tp = 0;
  for (const auto& b : blocks) {
    twice_area += b.neg * (2 * tp + b.pos);
    tp += b.pos;
  }
  return MetricValue(static_cast<double>(twice_area) /
                     static_cast<double>(2 * total_pos * total_neg));
}

MetricValue Aupr(std::span<const ScoredLabel> data) {
  const auto blocks = DescendingBlocks(data);
  std::uint64_t total_pos = 0;
  for (const auto& b : blocks) total_pos += b.pos;
  if (total_pos == 0) return MetricValue::Undefined();
  double ap = 0.0;
  std::uint64_t tp = 0, fp = 0;
  for (const auto& b : blocks) {
    tp += b.pos;
    fp += b.neg;
    if (b.pos == 0) continue;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += static_cast<double>(b.pos) / static_cast<double>(total_pos) * precision;
  }
  return MetricValue(ap);
}

const CategoryRow* MetricsReport::Find(std::string_view category) const {
  for (const auto& r : rows) {
    if (r.category == category) return &r;
  }
  return nullptr;
}

MetricsReport PerCategoryReport(
    std::span<const EvalRecord> records,
    const std::map<std::string, std::size_t>& unparseable) {
  if (records.empty() && unparseable.empty()) {
    throw Error(ErrorCode::kEmpty, "no records to report");
  }
  MetricsReport report;
  std::map<std::string, std::vector<const EvalRecord*>> by_category;
  for (const auto& r : records) {
    if (report.backend_id.empty() && report.strategy_id.empty()) {
      report.backend_id = r.backend_id;
      report.strategy_id = r.strategy_id;
    } else if (r.backend_id != report.backend_id ||
               r.strategy_id != report.strategy_id) {
      throw Error(ErrorCode::kInvalidArgument,
                  "report records must share one backend and strategy");
    }
    by_category[r.category].push_back(&r);
  }
  for (const auto& [cat, _] : unparseable) by_category[cat];

  for (const auto& [cat, recs] : by_category) {
    CategoryRow row;
    row.category = cat;
    row.n = recs.size();
    if (auto it = unparseable.find(cat); it != unparseable.end()) {
      row.unparseable = it->second;
    }
    if (!recs.empty()) {
      std::vector<Label> preds, labels;
      std::vector<ScoredLabel> scored;
      for (const EvalRecord* r : recs) {
        preds.push_back(r->prediction.label);
        labels.push_back(r->ground_truth);
        scored.push_back({r->prediction.score, r->ground_truth});
      }
      row.acc = MetricValue(Accuracy(preds, labels));
      row.auroc = Auroc(scored);
      row.aupr = Aupr(scored);
    }
    report.rows.push_back(std::move(row));
  }

  CategoryRow& avg = report.average;
  avg.category = "average";
  auto average_of = [&](MetricValue CategoryRow::*field, const char* name) {
    double sum = 0.0;
    std::size_t count = 0;
    std::vector<std::string> excluded;
    for (const auto& row : report.rows) {
      const MetricValue& v = row.*field;
      if (v.defined()) {
        sum += v.value();
        ++count;
      } else {
        excluded.push_back(row.category);
      }
    }
    if (!excluded.empty()) {
      std::string note = std::string(name) + " average excludes " +
                         std::to_string(excluded.size()) +
                         " categor" + (excluded.size() == 1 ? "y" : "ies") +
                         " with undefined value:";
      for (const auto& e : excluded) note += " " + e;
      report.notes.push_back(std::move(note));
    }
    return count == 0 ? MetricValue::Undefined()
                      : MetricValue(sum / static_cast<double>(count));
  };
  avg.acc = average_of(&CategoryRow::acc, "ACC");
  avg.auroc = average_of(&CategoryRow::auroc, "AUROC");
  avg.aupr = average_of(&CategoryRow::aupr, "AUPR");
  for (const auto& row : report.rows) {
    avg.n += row.n;
    avg.unparseable += row.unparseable;
  }
  return report;
}

std::string ReportToCsv(const MetricsReport& report) {
  std::string out = "category,acc,auroc,aupr,n,unparseable\n";
  auto line = [&](const CategoryRow& r) {
    out += r.category + "," + r.acc.Render(6) + "," + r.auroc.Render(6) + "," +
           r.aupr.Render(6) + "," + std::to_string(r.n) + "," +
           std::to_string(r.unparseable) + "\n";
  };
  for (const auto& r : report.rows) line(r);
  line(report.average);
  return out;
}

std::string ReportsToMarkdown(std::span<const MetricsReport> reports) {
  std::string out;
  out += "<!-- Scores are derived from binary labels (score = label) unless "
         "repeat averaging is enabled; AUROC/AUPR then describe a single "
         "operating point. -->\n";
  for (const auto& report : reports) {
    out += "\n### Base model: " + report.backend_id +
           " | strategy: " + report.strategy_id + "\n\n";
    out += "| Category | ACC | AUROC | AUPR |\n";
    out += "|---|---|---|---|\n";
    auto row = [&](const CategoryRow& r, bool bold) {
      const std::string name = bold ? "**" + r.category + "**" : r.category;
      out += "| " + name + " | " + r.acc.Render(3) + " | " + r.auroc.Render(3) +
             " | " + r.aupr.Render(3) + " |\n";
    };
    for (const auto& r : report.rows) row(r, false);
    row(report.average, true);
    if (!report.notes.empty()) {
      out += "\n";
      for (const auto& n : report.notes) out += "- " + n + "\n";
    }
  }
  return out;
}

}  // namespace vlmad
