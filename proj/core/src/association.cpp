#include "groundseg/association.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include <Eigen/Eigenvalues>

#include "groundseg/error.hpp"
#include "groundseg/parallel.hpp"

namespace groundseg {

void AssociationConfig::validate() const {
  if (max_views < 1) throw ConfigError("association: max_views must be >= 1");
  if (!(depth_prune_threshold > 0.0)) throw ConfigError("association: depth_prune_threshold must be > 0");
  if (normal_neighbors < 3) throw ConfigError("association: normal_neighbors must be >= 3");
}

double incidence_angle(const CameraView& view, const Eigen::Vector3d& voxel_center,
                       const Eigen::Vector3d& reference) {
  const Eigen::Vector3d ray = voxel_center - view.center();
  const double len = ray.norm();
  if (!(len > 0.0)) throw ArgumentError("incidence_angle: voxel center coincides with the camera center");
  const double s = std::min(1.0, std::abs(ray.dot(reference.normalized())) / len);
  return std::asin(s) * 180.0 / std::numbers::pi;
}

bool higher_priority(const ViewRecord& a, const ViewRecord& b) {
  const double ka = std::abs(a.incidence_angle - 90.0);
  const double kb = std::abs(b.incidence_angle - 90.0);
  if (ka != kb) return ka < kb;
  return a.view_index < b.view_index;
}

std::vector<Eigen::Vector3d> estimate_voxel_normals(const std::vector<OccupiedVoxel>& voxels,
                                                    const ChunkSpec& spec, int k) {
  const Eigen::Vector3d edge = spec.voxel_size();
  auto key_of = [&](const Eigen::Vector3d& c) {
    std::array<std::int64_t, 3> g{};
    for (int a = 0; a < 3; ++a) g[a] = static_cast<std::int64_t>(std::floor((c[a] - spec.origin[a]) / edge[a]));
    return g;
  };
  struct Hash {
    std::size_t operator()(const std::array<std::int64_t, 3>& g) const {
      return static_cast<std::size_t>(g[0] * 73856093LL ^ g[1] * 19349663LL ^ g[2] * 83492791LL);
    }
  };
  std::unordered_map<std::array<std::int64_t, 3>, std::size_t, Hash> lookup;
  lookup.reserve(voxels.size());
  for (std::size_t i = 0; i < voxels.size(); ++i) lookup.emplace(key_of(voxels[i].center), i);

  std::vector<Eigen::Vector3d> normals(voxels.size(), Eigen::Vector3d::UnitZ());
  constexpr int kRadius = 2;
  parallel_for(voxels.size(), [&](std::size_t i) {
    const auto g = key_of(voxels[i].center);
    std::vector<std::pair<double, std::size_t>> near;
    for (int dz = -kRadius; dz <= kRadius; ++dz) {
      for (int dy = -kRadius; dy <= kRadius; ++dy) {
        for (int dx = -kRadius; dx <= kRadius; ++dx) {
          const auto it = lookup.find({g[0] + dx, g[1] + dy, g[2] + dz});
          if (it == lookup.end()) continue;
          near.emplace_back((voxels[it->second].center - voxels[i].center).squaredNorm(), it->second);
        }
      }
    }
    std::sort(near.begin(), near.end());
    if (near.size() > static_cast<std::size_t>(k)) near.resize(k);
    if (near.size() < 3) return;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& [d, j] : near) mean += voxels[j].center;
    mean /= static_cast<double>(near.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& [d, j] : near) {
      const Eigen::Vector3d r = voxels[j].center - mean;
      cov += r * r.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    Eigen::Vector3d n = eig.eigenvectors().col(0);
    if (n.z() < 0.0) n = -n;
    if (n.allFinite() && n.norm() > 0.5) normals[i] = n.normalized();
  });
  return normals;
}

VoxelViewAssociation associate(const ChunkedVoxelGrid& grid, const std::vector<CameraView>& views,
                               const std::vector<DepthMap>& depth_maps, const AssociationConfig& cfg) {
  cfg.validate();
  if (depth_maps.size() != views.size()) {
    throw ArgumentError("associate: " + std::to_string(views.size()) + " views but " +
                        std::to_string(depth_maps.size()) + " depth maps");
  }
  for (std::size_t i = 0; i < views.size(); ++i) {
    views[i].validate();
    if (depth_maps[i].width != views[i].width || depth_maps[i].height != views[i].height) {
      throw ArgumentError("associate: depth map " + std::to_string(i) + " is " +
                          std::to_string(depth_maps[i].width) + "x" + std::to_string(depth_maps[i].height) +
                          " but view '" + views[i].image_id + "' is " + std::to_string(views[i].width) + "x" +
                          std::to_string(views[i].height));
    }
  }

  VoxelViewAssociation out;
  out.voxels = occupied_voxels(grid);
  out.records.resize(out.voxels.size());
  std::vector<Eigen::Vector3d> normals;
  if (cfg.angle_reference == AngleReference::SurfaceNormal) {
    normals = estimate_voxel_normals(out.voxels, grid.spec, cfg.normal_neighbors);
  }
  const Eigen::Vector3d up = Eigen::Vector3d::UnitZ();

  parallel_for(out.voxels.size(), [&](std::size_t i) {
    const Eigen::Vector3d& c = out.voxels[i].center;
    const Eigen::Vector3d& ref = normals.empty() ? up : normals[i];
    std::vector<ViewRecord> candidates;
    for (std::size_t vi = 0; vi < views.size(); ++vi) {
      const auto proj = project(views[vi], c);
      if (!proj) continue;
      const auto px = nearest_pixel(views[vi], proj->pixel);
      if (!px) continue;
      const double surface = depth_maps[vi].at(px->x(), px->y());
      if (!std::isfinite(surface) || std::abs(proj->depth - surface) > cfg.depth_prune_threshold) continue;
      candidates.push_back({static_cast<int>(vi), px->x(), px->y(), proj->depth,
                            incidence_angle(views[vi], c, ref)});
    }
    const auto keep = std::min(candidates.size(), static_cast<std::size_t>(cfg.max_views));
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), higher_priority);
    candidates.resize(keep);
    out.records[i] = std::move(candidates);
  });
  return out;
}

void write_association(const VoxelViewAssociation& assoc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "# chunk_index voxel_index view_index u v depth angle\n";
  char buf[160];
  for (std::size_t i = 0; i < assoc.size(); ++i) {
    const auto& vox = assoc.voxels[i];
    for (const auto& r : assoc.records[i]) {
      std::snprintf(buf, sizeof buf, "%lld,%lld,%lld %d %d %d %d %.17g %.17g\n",
                    static_cast<long long>(vox.chunk[0]), static_cast<long long>(vox.chunk[1]),
                    static_cast<long long>(vox.chunk[2]), vox.voxel, r.view_index, r.u, r.v, r.pixel_depth,
                    r.incidence_angle);
      out << buf;
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

VoxelViewAssociation read_association(const ChunkedVoxelGrid& grid, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open association file " + path.string());
  VoxelViewAssociation out;
  out.voxels = occupied_voxels(grid);
  out.records.resize(out.voxels.size());
  std::map<std::pair<ChunkIndex, std::int32_t>, std::size_t> slot;
  for (std::size_t i = 0; i < out.voxels.size(); ++i) slot[{out.voxels[i].chunk, out.voxels[i].voxel}] = i;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    long long c0, c1, c2;
    int voxel;
    ViewRecord r;
    if (std::sscanf(line.c_str(), "%lld,%lld,%lld %d %d %d %d %lf %lf", &c0, &c1, &c2, &voxel, &r.view_index,
                    &r.u, &r.v, &r.pixel_depth, &r.incidence_angle) != 9) {
      throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": malformed association record");
    }
    const auto it = slot.find({ChunkIndex{c0, c1, c2}, voxel});
    if (it == slot.end()) {
      throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                       ": record names a voxel that is not occupied in this grid");
    }
    out.records[it->second].push_back(r);
  }
  return out;
}

}  // namespace groundseg
