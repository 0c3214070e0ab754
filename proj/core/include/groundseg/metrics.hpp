#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "groundseg/point_cloud.hpp"

namespace groundseg {

/// Rows are ground truth, columns are predictions. Points whose truth is
/// Unlabeled are skipped. A labeled point predicted as Unlabeled is counted
/// in `unpredicted` for its truth class and treated as a false negative.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> counts{};
  std::array<std::uint64_t, kNumClasses> unpredicted{};

  void add(MaterialLabel truth, MaterialLabel pred);
  ConfusionMatrix& operator+=(const ConfusionMatrix& o);
  std::uint64_t total() const;
  bool operator==(const ConfusionMatrix&) const = default;
};

/// Throws ArgumentError on length mismatch.
void accumulate(ConfusionMatrix& cm, std::span<const MaterialLabel> truth, std::span<const MaterialLabel> pred);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double iou = 0.0;
  std::uint64_t support = 0;
  /// Set when any of the four ratios had a zero denominator (reported as 0).
  bool degenerate = false;
};

struct MetricReport {
  std::array<ClassMetrics, kNumClasses> classes{};
  ClassMetrics macro;
  ClassMetrics weighted;
};

/// Throws ArgumentError for an all-zero matrix.
MetricReport compute_metrics(const ConfusionMatrix& cm);

/// Aligned table with rows bare earth, road, grass, macro avg, weighted avg
/// and columns precision, recall, f1-score, IOU, support.
std::string format_report(const MetricReport& report);

/// `class,precision,recall,f1,iou,support` rows plus macro_avg and weighted_avg.
std::string format_csv(const MetricReport& report);

/// One weighted-average line per named report.
std::string format_comparison(const std::vector<std::pair<std::string, MetricReport>>& reports);

}  // namespace groundseg
