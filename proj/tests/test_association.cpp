#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "groundseg/association.hpp"
#include "groundseg/error.hpp"
#include "groundseg/raster.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace groundseg;
using groundseg::testing::look_at_camera;
using groundseg::testing::nadir_camera;
using groundseg::testing::Fixture;
using groundseg::testing::five_camera_fixture;
using groundseg::testing::oracle;


TEST(IncidenceAngle, HandCases) {
  const CameraView above = nadir_camera({0, 0, 10});
  EXPECT_NEAR(incidence_angle(above, {0, 0, 0}, Eigen::Vector3d::UnitZ()), 90.0, 1e-12);
  const CameraView side = look_at_camera({10, 0, 0}, {0, 0, 0}, 40, 30, 30.0, "s");
  EXPECT_NEAR(incidence_angle(side, {0, 0, 0}, Eigen::Vector3d::UnitZ()), 0.0, 1e-12);
  const CameraView oblique = look_at_camera({7, 0, 7}, {0, 0, 0}, 40, 30, 30.0, "o");
  EXPECT_NEAR(incidence_angle(oblique, {0, 0, 0}, Eigen::Vector3d::UnitZ()), 45.0, 1e-9);
  EXPECT_THROW(incidence_angle(above, above.center(), Eigen::Vector3d::UnitZ()), ArgumentError);
}

TEST(Associate, SingleNadirViewOverPlane) {
  TriangleMesh mesh = groundseg::testing::heightfield_mesh(8, 8, 1.0, [](double, double) { return 0.0; });
  std::vector<Eigen::Vector3d> pts;
  for (double x = 3.05; x < 5.0; x += 0.5) {
    for (double y = 3.05; y < 5.0; y += 0.5) pts.emplace_back(x, y, 0.01);
  }
  const PointCloud cloud(pts);
  ChunkSpec s;
  s.chunk_size = {8, 8, 4};
  s.voxel_counts = {16, 16, 8};
  s.origin = {0, 0, -0.25};
  const auto grid = voxelize(cloud, s);
  const CameraView v = nadir_camera({4, 4, 60}, 64, 64, 200.0);
  const auto a = associate(grid, {v}, {render_depth(v, mesh)}, AssociationConfig{});
  ASSERT_EQ(a.size(), pts.size());
  for (const auto& r : a.records) {
    ASSERT_EQ(r.size(), 1u);
    // Voxels sit within about 1.5 m of the nadir point, 60 m below.
    EXPECT_GT(r[0].incidence_angle, 88.5);
    EXPECT_LE(r[0].incidence_angle, 90.0);
  }
}

TEST(Associate, OccluderPrunes) {
  Fixture f = five_camera_fixture();
  AssociationConfig cfg;
  // A synthetic occluder ten thresholds in front of every surface of view 0.
  for (auto& d : f.depths[0].pixels) {
    if (std::isfinite(d)) d -= 10.0 * cfg.depth_prune_threshold;
  }
  const auto a = associate(f.grid, f.views, f.depths, cfg);
  for (const auto& rs : a.records) {
    for (const auto& r : rs) ASSERT_NE(r.view_index, 0);
  }
}

TEST(Associate, MatchesExhaustiveCandidateOracle) {
  const Fixture f = five_camera_fixture();
  for (const int cap : {1, 3, 5}) {
    AssociationConfig cfg;
    cfg.max_views = cap;
    const auto a = associate(f.grid, f.views, f.depths, cfg);
    std::size_t nonempty = 0, capped = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const auto expect = oracle(f, a.voxels[i].center, cfg.depth_prune_threshold, cap);
      ASSERT_EQ(a.records[i].size(), expect.size()) << "voxel " << i;
      for (std::size_t k = 0; k < expect.size(); ++k) {
        EXPECT_EQ(a.records[i][k].view_index, expect[k].view_index);
        EXPECT_EQ(a.records[i][k].u, expect[k].u);
        EXPECT_EQ(a.records[i][k].v, expect[k].v);
        EXPECT_NEAR(a.records[i][k].pixel_depth, expect[k].pixel_depth, 1e-9);
        EXPECT_NEAR(a.records[i][k].incidence_angle, expect[k].incidence_angle, 1e-9);
        const double surface = f.depths[static_cast<std::size_t>(expect[k].view_index)].at(expect[k].u, expect[k].v);
        EXPECT_LE(std::abs(a.records[i][k].pixel_depth - surface), cfg.depth_prune_threshold);
      }
      nonempty += !expect.empty();
      capped += expect.size() == static_cast<std::size_t>(cap);
    }
    EXPECT_GT(nonempty, a.size() / 2);
    EXPECT_GT(capped, 0u);
  }
}

TEST(Associate, PriorityDominatesDiscardedCandidates) {
  const Fixture f = five_camera_fixture();
  AssociationConfig cfg;
  const auto a = associate(f.grid, f.views, f.depths, cfg);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto everything = oracle(f, a.voxels[i].center, cfg.depth_prune_threshold, 100);
    if (a.records[i].empty()) continue;
    const double worst_kept = std::abs(a.records[i].back().incidence_angle - 90.0);
    for (const auto& c : everything) {
      const bool kept = std::any_of(a.records[i].begin(), a.records[i].end(),
                                    [&](const ViewRecord& r) { return r.view_index == c.view_index; });
      if (!kept) ASSERT_GE(std::abs(c.incidence_angle - 90.0), worst_kept);
    }
  }
}

TEST(Associate, BlindViewChangesNothing) {
  Fixture f = five_camera_fixture();
  const auto before = associate(f.grid, f.views, f.depths, AssociationConfig{});
  // Looking up, away from the terrain.
  CameraView blind = look_at_camera({6, 6, 20}, {6, 6, 40}, 48, 36, 40.0, "blind");
  f.views.push_back(blind);
  f.depths.push_back(render_depth(blind, f.mesh));
  const auto after = associate(f.grid, f.views, f.depths, AssociationConfig{});
  EXPECT_EQ(before.records, after.records);
}

TEST(Associate, DepthMapSizeMismatch) {
  Fixture f = five_camera_fixture();
  f.depths[1] = DepthMap(3, 3, kNoSurface);
  EXPECT_THROW(associate(f.grid, f.views, f.depths, AssociationConfig{}), ArgumentError);
}

TEST(Associate, FileRoundTrip) {
  const Fixture f = five_camera_fixture();
  const auto a = associate(f.grid, f.views, f.depths, AssociationConfig{});
  groundseg::testing::TempDir dir("assoc");
  write_association(a, dir / "a.txt");
  const auto b = read_association(f.grid, dir / "a.txt");
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a.records[i].size(), b.records[i].size());
    for (std::size_t k = 0; k < a.records[i].size(); ++k) {
      EXPECT_EQ(a.records[i][k].view_index, b.records[i][k].view_index);
      EXPECT_EQ(a.records[i][k].u, b.records[i][k].u);
      EXPECT_EQ(a.records[i][k].pixel_depth, b.records[i][k].pixel_depth);
    }
  }
}
