#pragma once

#include <filesystem>

#include "groundseg/mesh.hpp"
#include "groundseg/point_cloud.hpp"

namespace groundseg {

enum class PlyFormat { Ascii, BinaryLittleEndian };

/// Reads the "vertex" element: x,y,z (any scalar type), optional
/// red/green/blue, optional scalar "label". Other properties and elements
/// are skipped. Binary big-endian files are also accepted.
PointCloud read_point_cloud(const std::filesystem::path& path);

/// Positions are written as double so binary round trips are lossless.
void write_point_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                       PlyFormat format = PlyFormat::BinaryLittleEndian);

/// Vertex element plus a "face" element with a "vertex_indices" list.
TriangleMesh read_mesh(const std::filesystem::path& path);
void write_mesh(const TriangleMesh& mesh, const std::filesystem::path& path,
                PlyFormat format = PlyFormat::BinaryLittleEndian);

}  // namespace groundseg
