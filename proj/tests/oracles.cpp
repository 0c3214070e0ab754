#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "groundseg/raster.hpp"
#include "support.hpp"

namespace groundseg::testing {
namespace {

constexpr int kImageW = 82, kImageH = 64, kFeatW = 41, kFeatH = 32;

FeatureMap2D random_map(int view, int channels, Rng& rng) {
  FeatureMap2D m;
  m.view_index = view;
  m.width = kFeatW;
  m.height = kFeatH;
  m.channels = channels;
  m.image_width = kImageW;
  m.image_height = kImageH;
  m.values.resize(static_cast<std::size_t>(kFeatW) * kFeatH * channels);
  for (auto& v : m.values) v = rng.uniform(0.0, 2.0);
  return m;
}

const FeatureMap2D& map_for(const std::vector<FeatureMap2D>& maps, int view) {
  return *std::find_if(maps.begin(), maps.end(), [&](const FeatureMap2D& m) { return m.view_index == view; });
}

}  // namespace

Fixture five_camera_fixture() {
  Fixture f;
  auto h = [](double x, double y) { return 0.3 * std::sin(0.4 * x) + 0.2 * std::cos(0.3 * y); };
  f.mesh = heightfield_mesh(24, 24, 0.5, h);
  std::vector<Eigen::Vector3d> pts;
  for (double x = 0.1; x < 12.0; x += 0.37) {
    for (double y = 0.1; y < 12.0; y += 0.41) pts.emplace_back(x, y, h(x, y));
  }
  f.cloud = PointCloud(pts);
  ChunkSpec s;
  s.chunk_size = {8, 8, 4};
  s.voxel_counts = {16, 16, 8};
  s.origin = f.cloud.min_corner();
  f.grid = voxelize(f.cloud, s);
  f.views = {nadir_camera({6, 6, 14}, 48, 36, 40.0, "n0"),
             look_at_camera({-4, 6, 10}, {6, 6, 0}, 48, 36, 40.0, "o1"),
             look_at_camera({6, -6, 9}, {6, 6, 0}, 48, 36, 40.0, "o2"),
             nadir_camera({3, 3, 8}, 48, 36, 40.0, "n3"),
             look_at_camera({16, 14, 12}, {5, 5, 0}, 48, 36, 40.0, "o4")};
  for (const auto& v : f.views) f.depths.push_back(render_depth(v, f.mesh));
  return f;
}

std::vector<ViewRecord> oracle(const Fixture& f, const Eigen::Vector3d& c, double threshold, int cap) {
  std::vector<ViewRecord> all;
  for (std::size_t vi = 0; vi < f.views.size(); ++vi) {
    const auto& v = f.views[vi];
    const Eigen::Vector3d pc = v.rotation * c + v.translation;
    if (pc.z() <= 0.0) continue;
    const double u = v.fx * pc.x() / pc.z() + v.cx, w = v.fy * pc.y() / pc.z() + v.cy;
    for (int y = 0; y < v.height; ++y) {
      for (int x = 0; x < v.width; ++x) {
        if (!(u >= x && u < x + 1 && w >= y && w < y + 1)) continue;
        const double d = f.depths[vi].at(x, y);
        if (!std::isfinite(d) || std::abs(pc.z() - d) > threshold) continue;
        const Eigen::Vector3d ray = c - v.center();
        const double angle = std::asin(std::min(1.0, std::abs(ray.z()) / ray.norm())) * 180.0 / std::numbers::pi;
        all.push_back({static_cast<int>(vi), x, y, pc.z(), angle});
      }
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const ViewRecord& a, const ViewRecord& b) {
    const double ka = std::abs(a.incidence_angle - 90.0), kb = std::abs(b.incidence_angle - 90.0);
    return ka != kb ? ka < kb : a.view_index < b.view_index;
  });
  if (all.size() > static_cast<std::size_t>(cap)) all.resize(static_cast<std::size_t>(cap));
  return all;
}

RandomFixture random_fixture(std::uint64_t seed, std::size_t voxels, int views, int channels) {
  Rng rng(seed);
  RandomFixture f;
  for (int v = 0; v < views; ++v) f.maps.push_back(random_map(v, channels, rng));
  rng.shuffle(f.maps);
  f.assoc.voxels.resize(voxels);
  f.assoc.records.resize(voxels);
  for (auto& recs : f.assoc.records) {
    const auto n = rng.below(4);
    std::set<int> used;
    while (recs.size() < n) {
      const int v = static_cast<int>(rng.below(static_cast<std::uint64_t>(views)));
      if (!used.insert(v).second) continue;
      recs.push_back({v, static_cast<int>(rng.below(kImageW)), static_cast<int>(rng.below(kImageH)),
                      10.0 + static_cast<double>(rng.below(4)), rng.uniform(45.0, 90.0)});
    }
  }
  return f;
}

std::span<const double> oracle_cell(const std::vector<FeatureMap2D>& maps, const ViewRecord& r) {
  const auto& m = map_for(maps, r.view_index);
  // Floor arithmetic written out in doubles.
  const int row = static_cast<int>(std::floor(static_cast<double>(r.v) * m.height / m.image_height));
  const int col = static_cast<int>(std::floor(static_cast<double>(r.u) * m.width / m.image_width));
  return m.at(row, col);
}

Key locate(const ChunkSpec& s, const Eigen::Vector3d& p) {
  const Eigen::Vector3d e = s.voxel_size();
  Key k{};
  for (int a = 0; a < 3; ++a) {
    long g = static_cast<long>((p[a] - s.origin[a]) / e[a]) - 2;
    while (s.origin[a] + (g + 1) * e[a] <= p[a]) ++g;
    while (s.origin[a] + g * e[a] > p[a]) --g;
    const long n = s.voxel_counts[a];
    const long c = g >= 0 ? g / n : -((-g + n - 1) / n);
    k.chunk[static_cast<std::size_t>(a)] = c;
    k.voxel[static_cast<std::size_t>(a)] = static_cast<int>(g - c * n);
  }
  return k;
}

}  // namespace groundseg::testing
