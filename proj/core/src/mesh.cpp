#include "groundseg/mesh.hpp"

#include <string>

#include <Eigen/Geometry>

#include "groundseg/error.hpp"

namespace groundseg {

void TriangleMesh::validate() const {
  if (colors && colors->size() != vertices.size()) {
    throw ArgumentError("TriangleMesh: color count does not match vertex count");
  }
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    if (!vertices[v].allFinite()) {
      throw ArgumentError("TriangleMesh: non-finite vertex " + std::to_string(v));
    }
  }
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const auto& tri = triangles[t];
    for (const auto idx : tri) {
      if (idx >= vertices.size()) {
        throw ArgumentError("TriangleMesh: triangle " + std::to_string(t) + " references vertex " +
                            std::to_string(idx) + " of " + std::to_string(vertices.size()));
      }
    }
    const double area =
        0.5 * (vertices[tri[1]] - vertices[tri[0]]).cross(vertices[tri[2]] - vertices[tri[0]]).norm();
    if (area <= 1e-12) {
      throw ArgumentError("TriangleMesh: triangle " + std::to_string(t) + " is degenerate");
    }
  }
}

}  // namespace groundseg
