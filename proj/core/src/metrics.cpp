#include "groundseg/metrics.hpp"

#include <cstdio>

#include "groundseg/error.hpp"

namespace groundseg {

void ConfusionMatrix::add(MaterialLabel truth, MaterialLabel pred) {
  if (!is_labeled(truth)) return;
  const auto t = static_cast<std::size_t>(label_index(truth));
  if (is_labeled(pred)) {
    ++counts[t][static_cast<std::size_t>(label_index(pred))];
  } else {
    ++unpredicted[t];
  }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    for (std::size_t j = 0; j < kNumClasses; ++j) counts[i][j] += o.counts[i][j];
    unpredicted[i] += o.unpredicted[i];
  }
  return *this;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    for (const auto c : counts[i]) n += c;
    n += unpredicted[i];
  }
  return n;
}

void accumulate(ConfusionMatrix& cm, std::span<const MaterialLabel> truth, std::span<const MaterialLabel> pred) {
  if (truth.size() != pred.size()) {
    throw ArgumentError("accumulate: " + std::to_string(truth.size()) + " truth labels vs " +
                        std::to_string(pred.size()) + " predictions");
  }
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], pred[i]);
}

namespace {

double ratio(double num, double den, bool& degenerate) {
  if (den == 0.0) {
    degenerate = true;
    return 0.0;
  }
  return num / den;
}

}  // namespace

MetricReport compute_metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ArgumentError("compute_metrics: confusion matrix is all zero");
  MetricReport r;
  std::uint64_t total_support = 0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const double tp = static_cast<double>(cm.counts[k][k]);
    double row = static_cast<double>(cm.unpredicted[k]), col = 0.0;
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      row += static_cast<double>(cm.counts[k][j]);
      col += static_cast<double>(cm.counts[j][k]);
    }
    const double fp = col - tp, fn = row - tp;
    ClassMetrics& m = r.classes[k];
    m.precision = ratio(tp, tp + fp, m.degenerate);
    m.recall = ratio(tp, tp + fn, m.degenerate);
    m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall, m.degenerate);
    m.iou = ratio(tp, tp + fp + fn, m.degenerate);
    m.support = static_cast<std::uint64_t>(row);
    total_support += m.support;
  }
  for (const auto& m : r.classes) {
    const double w = static_cast<double>(m.support) / static_cast<double>(total_support);
    r.macro.precision += m.precision / kNumClasses;
    r.macro.recall += m.recall / kNumClasses;
    r.macro.f1 += m.f1 / kNumClasses;
    r.macro.iou += m.iou / kNumClasses;
    r.weighted.precision += w * m.precision;
    r.weighted.recall += w * m.recall;
    r.weighted.f1 += w * m.f1;
    r.weighted.iou += w * m.iou;
    r.macro.degenerate = r.macro.degenerate || m.degenerate;
    r.weighted.degenerate = r.weighted.degenerate || m.degenerate;
  }
  r.macro.support = total_support;
  r.weighted.support = total_support;
  return r;
}

namespace {

std::string report_row(const char* name, const ClassMetrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%12s %10.4f %10.4f %10.4f %10.4f %10llu\n", name, m.precision, m.recall, m.f1,
                m.iou, static_cast<unsigned long long>(m.support));
  return buf;
}

std::string csv_row(const char* name, const ClassMetrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f,%llu\n", name, m.precision, m.recall, m.f1, m.iou,
                static_cast<unsigned long long>(m.support));
  return buf;
}

}  // namespace

std::string format_report(const MetricReport& report) {
  char head[160];
  std::snprintf(head, sizeof head, "%12s %10s %10s %10s %10s %10s\n\n", "", "precision", "recall", "f1-score", "IOU",
                "support");
  std::string s = head;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    s += report_row(std::string(label_name(static_cast<MaterialLabel>(k))).c_str(), report.classes[k]);
  }
  s += "\n";
  s += report_row("macro avg", report.macro);
  s += report_row("weighted avg", report.weighted);
  return s;
}

std::string format_csv(const MetricReport& report) {
  std::string s = "class,precision,recall,f1,iou,support\n";
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    std::string name(label_name(static_cast<MaterialLabel>(k)));
    for (auto& c : name) {
      if (c == ' ') c = '_';
    }
    s += csv_row(name.c_str(), report.classes[k]);
  }
  s += csv_row("macro_avg", report.macro);
  s += csv_row("weighted_avg", report.weighted);
  return s;
}

std::string format_comparison(const std::vector<std::pair<std::string, MetricReport>>& reports) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-18s %10s %10s %10s %10s\n", "model (weighted)", "precision", "recall", "f1-score",
                "IOU");
  std::string s = buf;
  for (const auto& [name, r] : reports) {
    std::snprintf(buf, sizeof buf, "%-18s %10.4f %10.4f %10.4f %10.4f\n", name.c_str(), r.weighted.precision,
                  r.weighted.recall, r.weighted.f1, r.weighted.iou);
    s += buf;
  }
  return s;
}

}  // namespace groundseg
