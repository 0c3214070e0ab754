#include "groundseg/point_cloud.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>

#include "groundseg/error.hpp"

namespace groundseg {

std::optional<MaterialLabel> label_from_code(int code) {
  switch (code) {
    case 0:
      return MaterialLabel::BareEarth;
    case 1:
      return MaterialLabel::Road;
    case 2:
      return MaterialLabel::Grass;
    case 255:
      return MaterialLabel::Unlabeled;
    default:
      return std::nullopt;
  }
}

std::string_view label_name(MaterialLabel l) {
  switch (l) {
    case MaterialLabel::BareEarth:
      return "bare earth";
    case MaterialLabel::Road:
      return "road";
    case MaterialLabel::Grass:
      return "grass";
    case MaterialLabel::Unlabeled:
      break;
  }
  return "unlabeled";
}

Rgb label_color(MaterialLabel l) {
  switch (l) {
    case MaterialLabel::BareEarth:
      return {0, 0, 255};
    case MaterialLabel::Road:
      return {0, 255, 0};
    case MaterialLabel::Grass:
      return {255, 0, 0};
    case MaterialLabel::Unlabeled:
      break;
  }
  return {128, 128, 128};
}

PointCloud::PointCloud(std::vector<Eigen::Vector3d> positions,
                       std::optional<std::vector<Rgb>> colors,
                       std::optional<std::vector<MaterialLabel>> labels,
                       std::optional<double> point_spacing)
    : positions_(std::move(positions)),
      colors_(std::move(colors)),
      labels_(std::move(labels)),
      point_spacing_(point_spacing) {
  const auto n = positions_.size();
  if (colors_ && colors_->size() != n) {
    throw ArgumentError("PointCloud: " + std::to_string(colors_->size()) + " colors for " +
                        std::to_string(n) + " positions");
  }
  if (labels_ && labels_->size() != n) {
    throw ArgumentError("PointCloud: " + std::to_string(labels_->size()) + " labels for " +
                        std::to_string(n) + " positions");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!positions_[i].allFinite()) {
      throw ArgumentError("PointCloud: non-finite coordinate at point " + std::to_string(i));
    }
  }
  if (labels_) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!label_from_code(static_cast<int>((*labels_)[i]))) {
        throw ArgumentError("PointCloud: invalid label code " +
                            std::to_string(static_cast<int>((*labels_)[i])) + " at point " +
                            std::to_string(i));
      }
    }
  }
  if (point_spacing_ && !(*point_spacing_ > 0.0)) {
    throw ArgumentError("PointCloud: point_spacing must be positive");
  }
}

const std::vector<Rgb>& PointCloud::colors() const {
  if (!colors_) throw ArgumentError("PointCloud has no colors");
  return *colors_;
}

const std::vector<MaterialLabel>& PointCloud::labels() const {
  if (!labels_) throw ArgumentError("PointCloud has no labels");
  return *labels_;
}

PointCloud PointCloud::with_labels(std::vector<MaterialLabel> labels) const {
  return PointCloud(positions_, colors_, std::move(labels), point_spacing_);
}

PointCloud PointCloud::without_labels() const {
  return PointCloud(positions_, colors_, std::nullopt, point_spacing_);
}

Eigen::Vector3d PointCloud::min_corner() const {
  if (positions_.empty()) return Eigen::Vector3d::Zero();
  Eigen::Vector3d m = positions_.front();
  for (const auto& p : positions_) m = m.cwiseMin(p);
  return m;
}

Eigen::Vector3d PointCloud::max_corner() const {
  if (positions_.empty()) return Eigen::Vector3d::Zero();
  Eigen::Vector3d m = positions_.front();
  for (const auto& p : positions_) m = m.cwiseMax(p);
  return m;
}

std::uint64_t ClassHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

PointCloud downsample_grid(const PointCloud& cloud, double spacing,
                           std::optional<Eigen::Vector3d> origin) {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) {
    throw ArgumentError("downsample_grid: spacing must be positive, got " + std::to_string(spacing));
  }
  if (cloud.empty()) {
    return PointCloud({}, cloud.has_colors() ? std::optional<std::vector<Rgb>>(std::vector<Rgb>{})
                                             : std::nullopt,
                      cloud.has_labels()
                          ? std::optional<std::vector<MaterialLabel>>(std::vector<MaterialLabel>{})
                          : std::nullopt,
                      spacing);
  }
  const Eigen::Vector3d anchor = origin.value_or(cloud.min_corner());
  const auto& pts = cloud.positions();

  using Cell = std::tuple<std::int64_t, std::int64_t, std::int64_t>;
  std::vector<std::pair<Cell, std::uint32_t>> keyed(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Eigen::Vector3d q = (pts[i] - anchor) / spacing;
    keyed[i] = {Cell{static_cast<std::int64_t>(std::floor(q.x())),
                     static_cast<std::int64_t>(std::floor(q.y())),
                     static_cast<std::int64_t>(std::floor(q.z()))},
                static_cast<std::uint32_t>(i)};
  }
  std::sort(keyed.begin(), keyed.end());

  std::vector<std::uint32_t> kept;
  for (std::size_t begin = 0; begin < keyed.size();) {
    std::size_t end = begin;
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    while (end < keyed.size() && keyed[end].first == keyed[begin].first) {
      sum += pts[keyed[end].second];
      ++end;
    }
    const Eigen::Vector3d centroid = sum / static_cast<double>(end - begin);
    std::uint32_t best = keyed[begin].second;
    double best_d = (pts[best] - centroid).squaredNorm();
    // Members are sorted by index within a cell, so strict < keeps the lowest.
    for (std::size_t k = begin + 1; k < end; ++k) {
      const double d = (pts[keyed[k].second] - centroid).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = keyed[k].second;
      }
    }
    kept.push_back(best);
    begin = end;
  }
  std::sort(kept.begin(), kept.end());

  std::vector<Eigen::Vector3d> out_pts;
  out_pts.reserve(kept.size());
  std::optional<std::vector<Rgb>> out_colors;
  std::optional<std::vector<MaterialLabel>> out_labels;
  if (cloud.has_colors()) out_colors.emplace().reserve(kept.size());
  if (cloud.has_labels()) out_labels.emplace().reserve(kept.size());
  for (const auto i : kept) {
    out_pts.push_back(pts[i]);
    if (out_colors) out_colors->push_back(cloud.colors()[i]);
    if (out_labels) out_labels->push_back(cloud.labels()[i]);
  }
  return PointCloud(std::move(out_pts), std::move(out_colors), std::move(out_labels), spacing);
}

ClassHistogram class_histogram(const PointCloud& cloud) {
  if (!cloud.has_labels()) throw ArgumentError("class_histogram: cloud has no labels");
  ClassHistogram h;
  for (const auto l : cloud.labels()) {
    if (is_labeled(l)) {
      ++h.counts[label_index(l)];
    } else {
      ++h.unlabeled;
    }
  }
  const auto total = h.total();
  if (total == 0) throw ArgumentError("class_histogram: every point is Unlabeled");
  for (int k = 0; k < kNumClasses; ++k) {
    h.frequencies[k] = static_cast<double>(h.counts[k]) / static_cast<double>(total);
  }
  return h;
}

}  // namespace groundseg
