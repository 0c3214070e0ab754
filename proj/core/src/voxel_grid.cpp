#include "groundseg/voxel_grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "groundseg/error.hpp"
#include "groundseg/ply_io.hpp"

namespace groundseg {
namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  const auto q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

std::string chunk_name(const ChunkIndex& c) {
  return "(" + std::to_string(c[0]) + "," + std::to_string(c[1]) + "," + std::to_string(c[2]) + ")";
}

}  // namespace

void ChunkSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (!(chunk_size[a] > 0.0) || !std::isfinite(chunk_size[a])) {
      throw ArgumentError("ChunkSpec: chunk_size components must be positive and finite");
    }
    if (voxel_counts[a] <= 0) throw ArgumentError("ChunkSpec: voxel_counts must be positive");
  }
  if (!origin.allFinite()) throw ArgumentError("ChunkSpec: origin must be finite");
  const Eigen::Vector3d edge = voxel_size();
  for (int a = 0; a < 3; ++a) {
    if (!(edge[a] > 0.0) || !std::isfinite(edge[a])) {
      throw ArgumentError("ChunkSpec: voxel edge must be positive and finite");
    }
    if (std::abs(edge[a] * voxel_counts[a] - chunk_size[a]) > 1e-9) {
      throw ArgumentError("ChunkSpec: chunk size is not an integer multiple of the voxel edge");
    }
  }
}

Eigen::Vector3i VoxelChunk::local(int linear_index) const {
  const int i = linear_index % dims.x();
  const int rest = linear_index / dims.x();
  return {i, rest % dims.y(), rest / dims.y()};
}

std::size_t VoxelChunk::occupied_count() const {
  return static_cast<std::size_t>(std::count(occupancy.begin(), occupancy.end(), std::uint8_t{1}));
}

std::size_t ChunkedVoxelGrid::occupied_count() const {
  std::size_t n = 0;
  for (const auto& [idx, chunk] : chunks) n += chunk.occupied_count();
  return n;
}

ChunkSpec default_chunk_spec(const PointCloud& cloud) {
  ChunkSpec spec;
  spec.origin = cloud.min_corner();
  return spec;
}

ChunkedVoxelGrid voxelize(const PointCloud& cloud, const ChunkSpec& spec) {
  spec.validate();
  if (cloud.empty()) throw ArgumentError("voxelize: point cloud is empty");
  const Eigen::Vector3d edge = spec.voxel_size();
  const Eigen::Vector3d upper = cloud.max_corner() - spec.origin;

  struct Entry {
    ChunkIndex chunk;
    std::int32_t voxel;
    std::uint32_t point;
    bool operator<(const Entry& o) const {
      if (chunk != o.chunk) return chunk < o.chunk;
      if (voxel != o.voxel) return voxel < o.voxel;
      return point < o.point;
    }
  };
  std::vector<Entry> entries(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d q = cloud.position(i) - spec.origin;
    ChunkIndex chunk{};
    std::int64_t local[3];
    for (int a = 0; a < 3; ++a) {
      const double f = q[a] / edge[a];
      auto g = static_cast<std::int64_t>(std::floor(f));
      if (q[a] == upper[a] && f == std::floor(f) && g > 0) --g;
      chunk[a] = floor_div(g, spec.voxel_counts[a]);
      local[a] = g - chunk[a] * spec.voxel_counts[a];
    }
    const auto linear = local[0] + spec.voxel_counts.x() * (local[1] + spec.voxel_counts.y() * local[2]);
    entries[i] = {chunk, static_cast<std::int32_t>(linear), static_cast<std::uint32_t>(i)};
  }
  std::sort(entries.begin(), entries.end());

  ChunkedVoxelGrid grid;
  grid.spec = spec;
  const int nvox = spec.voxels_per_chunk();
  for (std::size_t b = 0; b < entries.size();) {
    std::size_t e = b;
    while (e < entries.size() && entries[e].chunk == entries[b].chunk) ++e;
    VoxelChunk chunk;
    chunk.index = entries[b].chunk;
    chunk.dims = spec.voxel_counts;
    chunk.occupancy.assign(nvox, 0);
    chunk.offsets.assign(nvox + 1, 0);
    chunk.point_ids.reserve(e - b);
    for (std::size_t k = b; k < e; ++k) {
      chunk.occupancy[entries[k].voxel] = 1;
      ++chunk.offsets[entries[k].voxel + 1];
      chunk.point_ids.push_back(entries[k].point);
    }
    for (int v = 0; v < nvox; ++v) chunk.offsets[v + 1] += chunk.offsets[v];
    grid.chunks.emplace(chunk.index, std::move(chunk));
    b = e;
  }
  return grid;
}

std::vector<MaterialLabel> voxel_ground_truth(const VoxelChunk& chunk, const PointCloud& cloud) {
  if (!cloud.has_labels()) throw ArgumentError("voxel_ground_truth: cloud has no labels");
  const auto& labels = cloud.labels();
  std::vector<MaterialLabel> out(chunk.voxel_count(), MaterialLabel::Unlabeled);
  for (std::size_t v = 0; v < out.size(); ++v) {
    if (!chunk.occupancy[v]) continue;
    std::array<int, kNumClasses> votes{};
    for (const auto p : chunk.points_in(static_cast<int>(v))) {
      if (p >= labels.size()) throw ArgumentError("voxel_ground_truth: point index exceeds cloud size");
      if (is_labeled(labels[p])) ++votes[label_index(labels[p])];
    }
    int best = -1;
    for (int k = 0; k < kNumClasses; ++k) {
      if (votes[k] > 0 && (best < 0 || votes[k] > votes[best])) best = k;
    }
    if (best >= 0) out[v] = static_cast<MaterialLabel>(best);
  }
  return out;
}

PointCloud transfer_labels_to_points(const ChunkedVoxelGrid& grid, const VoxelLabels& predictions,
                                     const PointCloud& cloud) {
  std::vector<MaterialLabel> labels(cloud.size(), MaterialLabel::Unlabeled);
  std::vector<std::uint8_t> seen(cloud.size(), 0);
  for (const auto& [idx, chunk] : grid.chunks) {
    const auto it = predictions.find(idx);
    for (std::size_t v = 0; v < chunk.voxel_count(); ++v) {
      if (!chunk.occupancy[v]) continue;
      if (it == predictions.end() || it->second.size() != chunk.voxel_count()) {
        throw ArgumentError("transfer_labels_to_points: no prediction for voxel " + std::to_string(v) +
                            " of chunk " + chunk_name(idx));
      }
      for (const auto p : chunk.points_in(static_cast<int>(v))) {
        if (p >= cloud.size()) {
          throw ArgumentError("transfer_labels_to_points: grid does not belong to this cloud");
        }
        labels[p] = it->second[v];
        seen[p] = 1;
      }
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) {
      throw ArgumentError("transfer_labels_to_points: point " + std::to_string(i) + " is in no voxel");
    }
  }
  return cloud.with_labels(std::move(labels));
}

Eigen::Vector3d voxel_center(const ChunkSpec& spec, const ChunkIndex& chunk, const Eigen::Vector3i& local) {
  const Eigen::Vector3d edge = spec.voxel_size();
  Eigen::Vector3d c;
  for (int a = 0; a < 3; ++a) {
    const double g = static_cast<double>(chunk[a] * spec.voxel_counts[a] + local[a]) + 0.5;
    c[a] = spec.origin[a] + g * edge[a];
  }
  return c;
}

std::vector<Eigen::Vector3d> voxel_centers(const VoxelChunk& chunk, const ChunkSpec& spec) {
  std::vector<Eigen::Vector3d> out;
  for (std::size_t v = 0; v < chunk.voxel_count(); ++v) {
    if (chunk.occupancy[v]) out.push_back(voxel_center(spec, chunk.index, chunk.local(static_cast<int>(v))));
  }
  return out;
}

std::vector<OccupiedVoxel> occupied_voxels(const ChunkedVoxelGrid& grid) {
  std::vector<OccupiedVoxel> out;
  out.reserve(grid.occupied_count());
  for (const auto& [idx, chunk] : grid.chunks) {
    for (std::size_t v = 0; v < chunk.voxel_count(); ++v) {
      if (!chunk.occupancy[v]) continue;
      const auto vi = static_cast<std::int32_t>(v);
      out.push_back({idx, vi, voxel_center(grid.spec, idx, chunk.local(vi))});
    }
  }
  return out;
}

VoxelLabels to_voxel_labels(const ChunkedVoxelGrid& grid, std::span<const MaterialLabel> per_voxel) {
  VoxelLabels out;
  std::size_t k = 0;
  for (const auto& [idx, chunk] : grid.chunks) {
    auto& labels = out[idx];
    labels.assign(chunk.voxel_count(), MaterialLabel::Unlabeled);
    for (std::size_t v = 0; v < chunk.voxel_count(); ++v) {
      if (!chunk.occupancy[v]) continue;
      if (k >= per_voxel.size()) throw ArgumentError("to_voxel_labels: too few per-voxel values");
      labels[v] = per_voxel[k++];
    }
  }
  if (k != per_voxel.size()) throw ArgumentError("to_voxel_labels: too many per-voxel values");
  return out;
}

void write_chunk_debug_ply(const VoxelChunk& chunk, const ChunkSpec& spec, const std::filesystem::path& path) {
  std::vector<Eigen::Vector3d> pts;
  std::vector<Rgb> colors;
  std::vector<MaterialLabel> labels;
  for (std::size_t v = 0; v < chunk.voxel_count(); ++v) {
    if (!chunk.occupancy[v]) continue;
    pts.push_back(voxel_center(spec, chunk.index, chunk.local(static_cast<int>(v))));
    const auto l = chunk.voxel_labels ? (*chunk.voxel_labels)[v] : MaterialLabel::Unlabeled;
    labels.push_back(l);
    colors.push_back(label_color(l));
  }
  write_point_cloud(PointCloud(std::move(pts), std::move(colors), std::move(labels)), path);
}

void write_voxel_grid(const ChunkedVoxelGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  char buf[160];
  const auto& s = grid.spec;
  out << "groundseg-voxel-grid 1\n";
  std::snprintf(buf, sizeof buf, "chunk_size %.17g %.17g %.17g\n", s.chunk_size.x(), s.chunk_size.y(), s.chunk_size.z());
  out << buf;
  out << "voxel_counts " << s.voxel_counts.x() << " " << s.voxel_counts.y() << " " << s.voxel_counts.z() << "\n";
  std::snprintf(buf, sizeof buf, "origin %.17g %.17g %.17g\n", s.origin.x(), s.origin.y(), s.origin.z());
  out << buf;
  for (const auto& [idx, ch] : grid.chunks) {
    out << "chunk " << idx[0] << " " << idx[1] << " " << idx[2] << " " << ch.occupied_count() << "\n";
    for (int v = 0; v < static_cast<int>(ch.voxel_count()); ++v) {
      const auto pts = ch.points_in(v);
      if (pts.empty()) continue;
      out << v;
      for (const auto p : pts) out << " " << p;
      out << "\n";
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

ChunkedVoxelGrid read_voxel_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("voxel grid not found: " + path.string());
  int line_no = 0;
  std::string line;
  auto fail = [&](const std::string& why) {
    throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + why);
  };
  auto next = [&]() {
    if (!std::getline(in, line)) fail("unexpected end of file");
    ++line_no;
    return std::istringstream(line);
  };
  if (next().str() != "groundseg-voxel-grid 1") fail("bad magic");
  ChunkedVoxelGrid grid;
  std::string key;
  {
    auto ss = next();
    if (!(ss >> key >> grid.spec.chunk_size.x() >> grid.spec.chunk_size.y() >> grid.spec.chunk_size.z()) ||
        key != "chunk_size")
      fail("expected chunk_size");
  }
  {
    auto ss = next();
    if (!(ss >> key >> grid.spec.voxel_counts.x() >> grid.spec.voxel_counts.y() >> grid.spec.voxel_counts.z()) ||
        key != "voxel_counts")
      fail("expected voxel_counts");
  }
  {
    auto ss = next();
    if (!(ss >> key >> grid.spec.origin.x() >> grid.spec.origin.y() >> grid.spec.origin.z()) || key != "origin")
      fail("expected origin");
  }
  try {
    grid.spec.validate();
  } catch (const ArgumentError& e) {
    fail(e.what());
  }
  const int nvox = grid.spec.voxels_per_chunk();
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    ChunkIndex idx{};
    std::size_t count = 0;
    if (!(ss >> key >> idx[0] >> idx[1] >> idx[2] >> count) || key != "chunk") fail("expected chunk header");
    VoxelChunk ch;
    ch.index = idx;
    ch.dims = grid.spec.voxel_counts;
    ch.occupancy.assign(static_cast<std::size_t>(nvox), 0);
    std::vector<std::vector<std::uint32_t>> members(static_cast<std::size_t>(nvox));
    for (std::size_t k = 0; k < count; ++k) {
      auto vs = next();
      int v = -1;
      if (!(vs >> v) || v < 0 || v >= nvox) fail("bad voxel index");
      std::uint32_t p;
      while (vs >> p) members[static_cast<std::size_t>(v)].push_back(p);
      if (!vs.eof() || members[static_cast<std::size_t>(v)].empty()) fail("bad member list");
      ch.occupancy[static_cast<std::size_t>(v)] = 1;
    }
    ch.offsets.assign(1, 0);
    for (const auto& m : members) {
      ch.point_ids.insert(ch.point_ids.end(), m.begin(), m.end());
      ch.offsets.push_back(static_cast<std::uint32_t>(ch.point_ids.size()));
    }
    if (!grid.chunks.emplace(idx, std::move(ch)).second) fail("duplicate chunk");
  }
  return grid;
}

}  // namespace groundseg
