#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <numeric>

#include "groundseg/error.hpp"
#include "groundseg/voxel_grid.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace groundseg;
using groundseg::testing::Key;
using groundseg::testing::locate;

namespace {

ChunkSpec spec_at(const Eigen::Vector3d& origin) {
  ChunkSpec s;
  s.origin = origin;
  return s;
}

}  // namespace

TEST(Voxelize, SinglePointAtOrigin) {
  const PointCloud c({{0, 0, 0}});
  const auto g = voxelize(c, spec_at(Eigen::Vector3d::Zero()));
  ASSERT_EQ(g.chunks.size(), 1u);
  const auto& ch = g.chunks.begin()->second;
  EXPECT_EQ(ch.index, (ChunkIndex{0, 0, 0}));
  EXPECT_EQ(ch.occupied_count(), 1u);
  EXPECT_EQ(ch.occupancy[0], 1);
}

TEST(Voxelize, HandCellArithmetic) {
  ChunkSpec s = spec_at(Eigen::Vector3d::Zero());
  s.chunk_size = {16, 16, 8};
  s.voxel_counts = {32, 32, 16};
  const PointCloud c({{8.0, 0.25, 0.25}, {0, 0, 0}, {15, 15, 7}});
  const auto g = voxelize(c, s);
  const auto& ch = g.chunks.at({0, 0, 0});
  EXPECT_EQ(ch.occupancy[static_cast<std::size_t>(ch.linear(16, 0, 0))], 1);
  EXPECT_EQ(ch.points_in(ch.linear(16, 0, 0)).size(), 1u);
  EXPECT_EQ(ch.points_in(ch.linear(16, 0, 0))[0], 0u);
}

TEST(Voxelize, SpecValidation) {
  ChunkSpec s;
  s.chunk_size = {16, 16, 8};
  s.voxel_counts = {32, 32, 16};
  EXPECT_NO_THROW(s.validate());
  s.voxel_counts = {0, 32, 16};
  EXPECT_THROW(s.validate(), ArgumentError);
  s.voxel_counts = {32, 32, 16};
  s.chunk_size = {16, -1, 8};
  EXPECT_THROW(s.validate(), ArgumentError);
}

TEST(Voxelize, MatchesBruteForceAssignment) {
  Rng rng(41);
  const PointCloud cloud = groundseg::testing::random_cloud(10000, rng, {-20, -10, -3}, {40, 30, 6});
  ChunkSpec s = spec_at(cloud.min_corner() - Eigen::Vector3d(0.3, 0.1, 0.2));
  s.chunk_size = {8, 8, 4};
  s.voxel_counts = {16, 16, 8};
  const auto g = voxelize(cloud, s);

  std::map<Key, std::vector<std::uint32_t>> oracle;
  for (std::uint32_t i = 0; i < cloud.size(); ++i) oracle[locate(s, cloud.position(i))].push_back(i);

  std::map<Key, std::vector<std::uint32_t>> got;
  std::size_t total = 0;
  for (const auto& [idx, ch] : g.chunks) {
    ASSERT_EQ(idx, ch.index);
    ASSERT_TRUE(std::any_of(ch.occupancy.begin(), ch.occupancy.end(), [](auto o) { return o != 0; }));
    for (int v = 0; v < static_cast<int>(ch.voxel_count()); ++v) {
      const auto pts = ch.points_in(v);
      ASSERT_EQ(ch.occupancy[static_cast<std::size_t>(v)] != 0, !pts.empty());
      total += pts.size();
      if (pts.empty()) continue;
      const Eigen::Vector3i l = ch.local(v);
      got[{idx, {l.x(), l.y(), l.z()}}] = {pts.begin(), pts.end()};
    }
  }
  EXPECT_EQ(total, cloud.size());
  EXPECT_EQ(got, oracle);
}

TEST(Voxelize, MaxBoundPointStaysInLastCell) {
  // Extent exactly one chunk: the max-corner point must not open a new chunk.
  const PointCloud c({{0, 0, 0}, {16, 16, 8}});
  ChunkSpec s = spec_at(Eigen::Vector3d::Zero());
  const auto g = voxelize(c, s);
  ASSERT_EQ(g.chunks.size(), 1u);
  const auto& ch = g.chunks.begin()->second;
  EXPECT_EQ(ch.occupancy[static_cast<std::size_t>(ch.linear(31, 31, 15))], 1);
}

TEST(VoxelCenters, FormulaAndContainment) {
  ChunkSpec s = spec_at({1.0, -2.0, 0.5});
  EXPECT_EQ(voxel_center(spec_at(Eigen::Vector3d::Zero()), {0, 0, 0}, {0, 0, 0}), Eigen::Vector3d(0.25, 0.25, 0.25));
  Rng rng(43);
  const PointCloud cloud = groundseg::testing::random_cloud(2000, rng, {0, 0, 0}, {30, 30, 10});
  const auto g = voxelize(cloud, s);
  const Eigen::Vector3d e = s.voxel_size();
  for (const auto& [idx, ch] : g.chunks) {
    const auto centers = voxel_centers(ch, s);
    std::size_t k = 0;
    for (int v = 0; v < static_cast<int>(ch.voxel_count()); ++v) {
      if (!ch.occupancy[static_cast<std::size_t>(v)]) continue;
      const Eigen::Vector3i l = ch.local(v);
      Eigen::Vector3d expect;
      for (int a = 0; a < 3; ++a) {
        const double cell = static_cast<double>(idx[static_cast<std::size_t>(a)] * s.voxel_counts[a] + l[a]);
        expect[a] = s.origin[a] + (cell + 0.5) * e[a];
      }
      ASSERT_LT((centers[k] - expect).norm(), 1e-9);
      ASSERT_EQ(locate(s, centers[k]).voxel, (std::array<int, 3>{l.x(), l.y(), l.z()}));
      for (auto pid : ch.points_in(v)) {
        ASSERT_LE((cloud.position(pid) - centers[k]).cwiseAbs().maxCoeff(), 0.5 * e.maxCoeff() + 1e-9);
      }
      ++k;
    }
    EXPECT_EQ(k, centers.size());
  }
}

TEST(VoxelGroundTruth, MajorityAndTies) {
  const PointCloud c({{0.1, 0.1, 0.1}, {0.2, 0.1, 0.1}, {0.3, 0.1, 0.1}, {1.1, 0.1, 0.1}, {1.2, 0.1, 0.1}},
                     std::nullopt,
                     std::vector<MaterialLabel>{MaterialLabel::Road, MaterialLabel::Road, MaterialLabel::Grass,
                                                MaterialLabel::Grass, MaterialLabel::BareEarth});
  const auto g = voxelize(c, spec_at(Eigen::Vector3d::Zero()));
  const auto& ch = g.chunks.at({0, 0, 0});
  const auto gt = voxel_ground_truth(ch, c);
  EXPECT_EQ(gt[static_cast<std::size_t>(ch.linear(0, 0, 0))], MaterialLabel::Road);
  EXPECT_EQ(gt[static_cast<std::size_t>(ch.linear(2, 0, 0))], MaterialLabel::BareEarth);
  EXPECT_EQ(gt[static_cast<std::size_t>(ch.linear(5, 5, 5))], MaterialLabel::Unlabeled);
}

TEST(VoxelGroundTruth, MatchesCountingOracle) {
  Rng rng(47);
  const PointCloud cloud = groundseg::testing::random_cloud(6000, rng, {0, 0, 0}, {6, 6, 2});
  ChunkSpec s = spec_at(Eigen::Vector3d::Zero());
  s.voxel_counts = {16, 16, 8};  // 1 m voxels, several points each
  const auto g = voxelize(cloud, s);
  std::map<std::pair<ChunkIndex, int>, std::array<int, 3>> votes;
  for (std::uint32_t i = 0; i < cloud.size(); ++i) {
    const Key k = locate(s, cloud.position(i));
    const auto& ch = g.chunks.at(k.chunk);
    ++votes[{k.chunk, ch.linear(k.voxel[0], k.voxel[1], k.voxel[2])}][static_cast<std::size_t>(cloud.labels()[i])];
  }
  for (const auto& [idx, ch] : g.chunks) {
    const auto gt = voxel_ground_truth(ch, cloud);
    for (int v = 0; v < static_cast<int>(ch.voxel_count()); ++v) {
      const auto it = votes.find({idx, v});
      if (it == votes.end()) {
        ASSERT_EQ(gt[static_cast<std::size_t>(v)], MaterialLabel::Unlabeled);
        continue;
      }
      const auto& c = it->second;
      const auto best = static_cast<int>(std::max_element(c.begin(), c.end()) - c.begin());
      ASSERT_EQ(gt[static_cast<std::size_t>(v)], static_cast<MaterialLabel>(best));
    }
  }
}

TEST(LabelTransfer, EveryPointOneLabelCoordinatesUnchanged) {
  Rng rng(53);
  const PointCloud cloud = groundseg::testing::random_cloud(5000, rng, {0, 0, 0}, {20, 20, 3});
  const auto g = voxelize(cloud, spec_at(cloud.min_corner()));
  const auto occ = occupied_voxels(g);
  std::vector<MaterialLabel> per_voxel(occ.size());
  for (auto& l : per_voxel) l = static_cast<MaterialLabel>(rng.below(3));
  const auto pred = to_voxel_labels(g, per_voxel);
  const PointCloud out = transfer_labels_to_points(g, pred, cloud);
  ASSERT_EQ(out.size(), cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    ASSERT_EQ(std::memcmp(out.position(i).data(), cloud.position(i).data(), sizeof(double) * 3), 0);
  }
  EXPECT_EQ(out.colors(), cloud.colors());
  // Membership oracle: each point takes the label of the voxel containing it.
  std::map<std::pair<ChunkIndex, int>, MaterialLabel> lookup;
  for (std::size_t k = 0; k < occ.size(); ++k) lookup[{occ[k].chunk, occ[k].voxel}] = per_voxel[k];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Key k = locate(g.spec, cloud.position(i));
    const auto& ch = g.chunks.at(k.chunk);
    ASSERT_TRUE(is_labeled(out.labels()[i]));
    ASSERT_EQ(out.labels()[i], lookup.at({k.chunk, ch.linear(k.voxel[0], k.voxel[1], k.voxel[2])}));
  }
}

TEST(LabelTransfer, PermutationEquivariant) {
  Rng rng(59);
  const PointCloud cloud = groundseg::testing::random_cloud(800, rng, {0, 0, 0}, {5, 5, 1});
  std::vector<std::size_t> perm(cloud.size());
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  std::vector<Eigen::Vector3d> p;
  for (auto i : perm) p.push_back(cloud.position(i));
  const PointCloud shuffled(p);
  const ChunkSpec s = spec_at(Eigen::Vector3d::Zero());
  auto label_of = [&](const Eigen::Vector3d& c) {
    return static_cast<MaterialLabel>(static_cast<int>(std::floor(c.x() * 2) + std::floor(c.y() * 2)) % 3);
  };
  auto run = [&](const PointCloud& c) {
    const auto g = voxelize(c, s);
    const auto occ = occupied_voxels(g);
    std::vector<MaterialLabel> pv;
    for (const auto& o : occ) pv.push_back(label_of(o.center));
    return transfer_labels_to_points(g, to_voxel_labels(g, pv), c).labels();
  };
  const auto a = run(cloud), b = run(shuffled);
  for (std::size_t i = 0; i < perm.size(); ++i) ASSERT_EQ(b[i], a[perm[i]]);
}

TEST(LabelTransfer, SingleVoxelThreePoints) {
  const PointCloud c({{0.1, 0.1, 0.1}, {0.2, 0.2, 0.2}, {0.3, 0.3, 0.3}});
  const auto g = voxelize(c, spec_at(Eigen::Vector3d::Zero()));
  const auto out = transfer_labels_to_points(g, to_voxel_labels(g, std::vector{MaterialLabel::Grass}), c);
  EXPECT_EQ(out.labels(), std::vector<MaterialLabel>(3, MaterialLabel::Grass));
}
