#include <gtest/gtest.h>

#include <algorithm>

#include "groundseg/error.hpp"
#include "groundseg/metrics.hpp"
#include "groundseg/rng.hpp"

using namespace groundseg;

namespace {

constexpr auto B = MaterialLabel::BareEarth;
constexpr auto R = MaterialLabel::Road;
constexpr auto G = MaterialLabel::Grass;
constexpr auto U = MaterialLabel::Unlabeled;

ConfusionMatrix random_matrix(Rng& rng) {
  ConfusionMatrix cm;
  for (auto& row : cm.counts) {
    for (auto& c : row) c = rng.below(4) == 0 ? 0 : rng.below(1000);
  }
  for (auto& u : cm.unpredicted) u = rng.below(3) == 0 ? rng.below(50) : 0;
  if (cm.total() == 0) cm.counts[0][0] = 1;
  return cm;
}

}  // namespace

TEST(ConfusionMatrix, SinglePoints) {
  ConfusionMatrix a;
  std::vector<MaterialLabel> t{B}, p{B};
  accumulate(a, t, p);
  EXPECT_EQ(a.counts[0][0], 1u);
  ConfusionMatrix b;
  p = {G};
  accumulate(b, t, p);
  EXPECT_EQ(b.counts[0][2], 1u);
}

TEST(ConfusionMatrix, UnlabeledTruthSkippedUnlabeledPredictionIsMiss) {
  ConfusionMatrix cm;
  std::vector<MaterialLabel> t{U, R}, p{R, U};
  accumulate(cm, t, p);
  EXPECT_EQ(cm.total(), 1u);
  EXPECT_EQ(cm.unpredicted[1], 1u);
  const auto r = compute_metrics(cm);
  EXPECT_EQ(r.classes[1].recall, 0.0);
  EXPECT_EQ(r.classes[1].support, 1u);
}

TEST(ConfusionMatrix, LengthMismatchThrows) {
  ConfusionMatrix cm;
  std::vector<MaterialLabel> t{B, R}, p{B};
  EXPECT_THROW(accumulate(cm, t, p), ArgumentError);
}

TEST(ConfusionMatrix, MatchesBruteForceCount) {
  Rng rng(1);
  const MaterialLabel all[] = {B, R, G, U};
  std::vector<MaterialLabel> t(5000), p(5000);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = all[rng.below(4)];
    p[i] = all[rng.below(4)];
  }
  ConfusionMatrix cm;
  accumulate(cm, t, p);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      std::uint64_t n = 0;
      for (std::size_t i = 0; i < t.size(); ++i) n += t[i] == all[a] && p[i] == all[b];
      EXPECT_EQ(cm.counts[a][b], n);
    }
  }
}

TEST(ConfusionMatrix, PartialSumsCommute) {
  Rng rng(2);
  ConfusionMatrix a = random_matrix(rng), b = random_matrix(rng);
  ConfusionMatrix ab = a, ba = b;
  ab += b;
  ba += a;
  EXPECT_EQ(ab, ba);
}

TEST(Metrics, PerfectDiagonal) {
  ConfusionMatrix cm;
  cm.counts[0][0] = 5;
  cm.counts[1][1] = 3;
  cm.counts[2][2] = 9;
  const auto r = compute_metrics(cm);
  for (const auto& m : r.classes) {
    EXPECT_EQ(m.precision, 1.0);
    EXPECT_EQ(m.recall, 1.0);
    EXPECT_EQ(m.f1, 1.0);
    EXPECT_EQ(m.iou, 1.0);
  }
  EXPECT_EQ(r.weighted.f1, 1.0);
  EXPECT_EQ(r.macro.iou, 1.0);
}

TEST(Metrics, HandComputedClass) {
  // Class 0: TP 3, FP 1 (a road point predicted bare earth), FN 2.
  ConfusionMatrix cm;
  cm.counts[0][0] = 3;
  cm.counts[0][1] = 2;
  cm.counts[1][0] = 1;
  cm.counts[1][1] = 4;
  cm.counts[2][2] = 1;
  const auto r = compute_metrics(cm);
  EXPECT_DOUBLE_EQ(r.classes[0].precision, 0.75);
  EXPECT_DOUBLE_EQ(r.classes[0].recall, 0.6);
  EXPECT_NEAR(r.classes[0].f1, 2 * 0.75 * 0.6 / 1.35, 1e-15);
  EXPECT_NEAR(r.classes[0].f1, 0.6667, 1e-4);
  EXPECT_DOUBLE_EQ(r.classes[0].iou, 0.5);
}

TEST(Metrics, ZeroDenominatorsAreFlagged) {
  ConfusionMatrix cm;
  cm.counts[0][0] = 4;
  const auto r = compute_metrics(cm);
  EXPECT_FALSE(r.classes[0].degenerate);
  EXPECT_TRUE(r.classes[1].degenerate);
  EXPECT_EQ(r.classes[1].f1, 0.0);
  EXPECT_EQ(r.weighted.f1, 1.0);
}

TEST(Metrics, AllZeroMatrixThrows) { EXPECT_THROW(compute_metrics(ConfusionMatrix{}), ArgumentError); }

TEST(Metrics, JaccardNeverExceedsDice) {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const auto r = compute_metrics(random_matrix(rng));
    for (const auto& m : r.classes) {
      ASSERT_LE(m.iou, m.f1 + 1e-15);
      ASSERT_LE(m.f1, 1.0);
      const bool boundary = m.f1 == 0.0 || m.f1 == 1.0;
      if (!boundary) ASSERT_LT(m.iou, m.f1);
    }
  }
}

TEST(Metrics, WeightedF1WithinPerClassRange) {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const auto r = compute_metrics(random_matrix(rng));
    double lo = 1.0, hi = 0.0;
    for (const auto& m : r.classes) {
      if (m.support == 0) continue;
      lo = std::min(lo, m.f1);
      hi = std::max(hi, m.f1);
    }
    ASSERT_GE(r.weighted.f1, lo - 1e-12);
    ASSERT_LE(r.weighted.f1, hi + 1e-12);
  }
}

TEST(Metrics, InvariantUnderClassPermutation) {
  Rng rng(5);
  const int perm[3] = {2, 0, 1};
  for (int i = 0; i < 200; ++i) {
    const ConfusionMatrix cm = random_matrix(rng);
    ConfusionMatrix pm;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) pm.counts[perm[a]][perm[b]] = cm.counts[a][b];
      pm.unpredicted[perm[a]] = cm.unpredicted[a];
    }
    const auto r = compute_metrics(cm), q = compute_metrics(pm);
    for (int k = 0; k < 3; ++k) {
      EXPECT_DOUBLE_EQ(r.classes[k].f1, q.classes[perm[k]].f1);
      EXPECT_DOUBLE_EQ(r.classes[k].iou, q.classes[perm[k]].iou);
    }
    EXPECT_NEAR(r.weighted.f1, q.weighted.f1, 1e-12);
    EXPECT_NEAR(r.macro.iou, q.macro.iou, 1e-12);
  }
}

TEST(Report, TableLayout) {
  ConfusionMatrix cm;
  cm.counts[0][0] = 8;
  cm.counts[1][1] = 2;
  cm.counts[2][2] = 3;
  cm.counts[2][0] = 1;
  const std::string text = format_report(compute_metrics(cm));
  const char* rows[] = {"bare earth", "road", "grass", "macro avg", "weighted avg"};
  std::size_t pos = text.find("precision");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_LT(pos, text.find("recall"));
  EXPECT_LT(text.find("recall"), text.find("f1-score"));
  EXPECT_LT(text.find("f1-score"), text.find("IOU"));
  for (const char* row : rows) {
    const auto at = text.find(row, pos);
    ASSERT_NE(at, std::string::npos) << row;
    pos = at;
  }
}

TEST(Report, CsvSchema) {
  ConfusionMatrix cm;
  cm.counts[0][0] = 1;
  const std::string csv = format_csv(compute_metrics(cm));
  EXPECT_EQ(csv.rfind("class,precision,recall,f1,iou,support\n", 0), 0u);
  EXPECT_NE(csv.find("\nbare_earth,"), std::string::npos);
  EXPECT_NE(csv.find("\nmacro_avg,"), std::string::npos);
  EXPECT_NE(csv.find("\nweighted_avg,"), std::string::npos);
}
