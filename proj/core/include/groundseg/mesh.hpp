#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "groundseg/point_cloud.hpp"

namespace groundseg {

struct TriangleMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  std::optional<std::vector<Rgb>> colors;

  /// Throws ArgumentError on out-of-range indices, a color array of the wrong
  /// length, or a triangle with area below 1e-12 m^2.
  void validate() const;
  bool empty() const { return triangles.empty(); }
};

}  // namespace groundseg
