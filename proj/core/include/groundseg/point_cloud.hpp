#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace groundseg {

enum class MaterialLabel : std::uint8_t {
  BareEarth = 0,
  Road = 1,
  Grass = 2,
  Unlabeled = 255,
};

inline constexpr int kNumClasses = 3;

/// Accepts exactly the four admissible codes.
std::optional<MaterialLabel> label_from_code(int code);
constexpr int label_index(MaterialLabel l) { return static_cast<int>(l); }
constexpr bool is_labeled(MaterialLabel l) { return l != MaterialLabel::Unlabeled; }
std::string_view label_name(MaterialLabel l);

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Display palette: bare earth blue, road green, grass red, unlabeled gray.
Rgb label_color(MaterialLabel l);

/// Ground-layer point set in a right-handed, Z-up metric frame. Colors and
/// labels are optional but, when present, run parallel to the positions.
/// Instances are immutable; transformations return new clouds.
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(std::vector<Eigen::Vector3d> positions,
                      std::optional<std::vector<Rgb>> colors = std::nullopt,
                      std::optional<std::vector<MaterialLabel>> labels = std::nullopt,
                      std::optional<double> point_spacing = std::nullopt);

  std::size_t size() const { return positions_.size(); }
  bool empty() const { return positions_.empty(); }

  const std::vector<Eigen::Vector3d>& positions() const { return positions_; }
  const Eigen::Vector3d& position(std::size_t i) const { return positions_[i]; }

  bool has_colors() const { return colors_.has_value(); }
  const std::vector<Rgb>& colors() const;

  bool has_labels() const { return labels_.has_value(); }
  const std::vector<MaterialLabel>& labels() const;

  std::optional<double> point_spacing() const { return point_spacing_; }

  PointCloud with_labels(std::vector<MaterialLabel> labels) const;
  PointCloud without_labels() const;

  /// Axis-aligned bounds; both zero for an empty cloud.
  Eigen::Vector3d min_corner() const;
  Eigen::Vector3d max_corner() const;

 private:
  std::vector<Eigen::Vector3d> positions_;
  std::optional<std::vector<Rgb>> colors_;
  std::optional<std::vector<MaterialLabel>> labels_;
  std::optional<double> point_spacing_;
};

struct ClassHistogram {
  std::array<std::uint64_t, kNumClasses> counts{};
  std::array<double, kNumClasses> frequencies{};
  std::uint64_t unlabeled = 0;

  std::uint64_t total() const;
};

/// Keeps at most one point per cubic cell of edge `spacing`. Cells are anchored
/// at `origin` (the cloud's bounding-box minimum when omitted). The retained
/// point is the member nearest the centroid of its cell, lowest index on ties;
/// output preserves input order.
PointCloud downsample_grid(const PointCloud& cloud, double spacing,
                           std::optional<Eigen::Vector3d> origin = std::nullopt);

ClassHistogram class_histogram(const PointCloud& cloud);

}  // namespace groundseg
