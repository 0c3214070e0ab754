#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <fstream>

#include "groundseg/error.hpp"
#include "groundseg/raster.hpp"
#include "groundseg/synthetic.hpp"
#include "raycast.hpp"
#include "support.hpp"

using namespace groundseg;
using groundseg::testing::TempDir;

namespace {

SceneSpec small_spec(std::uint64_t seed) {
  SceneSpec s = default_scene_spec(seed);
  const double k = 0.2;  // shrink the 100 m layout to 20 m
  for (auto& r : s.regions) {
    for (auto& v : r.polygon) v *= k;
  }
  for (auto& p : s.yellow_grass) {
    p.center *= k;
    p.radius *= k;
  }
  s.extent_x = s.extent_y = 20.0;
  s.sample_spacing = 0.3;
  return s;
}

}  // namespace

TEST(Scene, ZeroRoughnessIsPlanar) {
  SceneSpec s = small_spec(1);
  s.roughness = {0.0, 0.0, 0.0};
  s.elevation = {0.0, 0.0, 0.0};
  s.point_jitter = 0.0;
  const Scene scene = generate_scene(s);
  for (const auto& v : scene.mesh.vertices) ASSERT_EQ(v.z(), scene.mesh.vertices[0].z());
  for (const auto& p : scene.cloud.positions()) ASSERT_EQ(p.z(), scene.mesh.vertices[0].z());
}

TEST(Scene, FixedSeedIsBitwiseIdentical) {
  const Scene a = generate_scene(small_spec(3));
  const Scene b = generate_scene(small_spec(3));
  ASSERT_EQ(a.mesh.vertices.size(), b.mesh.vertices.size());
  for (std::size_t i = 0; i < a.mesh.vertices.size(); ++i) ASSERT_EQ(a.mesh.vertices[i], b.mesh.vertices[i]);
  EXPECT_EQ(*a.mesh.colors, *b.mesh.colors);
  ASSERT_EQ(a.cloud.size(), b.cloud.size());
  for (std::size_t i = 0; i < a.cloud.size(); ++i) ASSERT_EQ(a.cloud.position(i), b.cloud.position(i));
  EXPECT_EQ(a.cloud.labels(), b.cloud.labels());
  EXPECT_EQ(a.cloud.colors(), b.cloud.colors());
}

TEST(Scene, UncoveredExtentIsConfigError) {
  SceneSpec s;
  s.extent_x = s.extent_y = 10.0;
  s.regions.push_back({{{0, 0}, {5, 0}, {5, 10}, {0, 10}}, MaterialLabel::Road});
  EXPECT_THROW(generate_scene(s), ConfigError);
}

TEST(Scene, LabelsFollowRegions) {
  const SceneSpec s = small_spec(4);
  const Scene scene = generate_scene(s);
  for (std::size_t i = 0; i < scene.cloud.size(); i += 7) {
    const auto& p = scene.cloud.position(i);
    ASSERT_EQ(scene.cloud.labels()[i], *region_label(s, p.x(), p.y()));
  }
}

TEST(Scene, DeviationScalesWithRoughness) {
  // Large planar extent split into three vertical bands.
  SceneSpec s;
  s.extent_x = 300.0;
  s.extent_y = 100.0;
  s.seed = 9;
  s.regions.push_back({{{-1, -1}, {100, -1}, {100, 101}, {-1, 101}}, MaterialLabel::BareEarth});
  s.regions.push_back({{{100, -1}, {200, -1}, {200, 101}, {100, 101}}, MaterialLabel::Road});
  s.regions.push_back({{{200, -1}, {301, -1}, {301, 101}, {200, 101}}, MaterialLabel::Grass});
  s.relief_amplitude = 0.5;
  std::array<double, 3> sum{}, count{};
  Rng rng(10);
  for (int i = 0; i < 60000; ++i) {
    const double x = rng.uniform(0, 300), y = rng.uniform(0, 100);
    const auto k = static_cast<std::size_t>(label_index(*region_label(s, x, y)));
    sum[k] += std::abs(terrain_height(s, x, y) - terrain_relief(s, x, y) - s.elevation[k]);
    ++count[k];
  }
  std::array<double, 3> ratio{};
  for (std::size_t k = 0; k < 3; ++k) ratio[k] = sum[k] / count[k] / s.roughness[k];
  for (std::size_t k = 1; k < 3; ++k) EXPECT_NEAR(ratio[k] / ratio[0], 1.0, 0.2);
}

TEST(Scene, RoadIsFlatterThanBareEarth) {
  const SceneSpec s = default_scene_spec(5);
  const Scene scene = generate_scene(s);
  std::array<double, 3> sum{}, sq{}, n{};
  for (std::size_t i = 0; i < scene.cloud.size(); ++i) {
    const auto k = static_cast<std::size_t>(label_index(scene.cloud.labels()[i]));
    const auto& p = scene.cloud.position(i);
    const double d = p.z() - terrain_relief(s, p.x(), p.y());
    sum[k] += d;
    sq[k] += d * d;
    ++n[k];
  }
  auto var = [&](std::size_t k) { return sq[k] / n[k] - (sum[k] / n[k]) * (sum[k] / n[k]); };
  EXPECT_LT(var(1), var(0));
  EXPECT_LT(var(1), var(2));
}

TEST(Scene, SpecFileRoundTrip) {
  TempDir dir("scene");
  const SceneSpec a = default_scene_spec(6);
  write_scene_spec(a, dir / "scene.cfg");
  const SceneSpec b = read_scene_spec(dir / "scene.cfg");
  ASSERT_EQ(a.regions.size(), b.regions.size());
  for (std::size_t i = 0; i < a.regions.size(); ++i) {
    EXPECT_EQ(a.regions[i].label, b.regions[i].label);
    ASSERT_EQ(a.regions[i].polygon.size(), b.regions[i].polygon.size());
    for (std::size_t j = 0; j < a.regions[i].polygon.size(); ++j) EXPECT_EQ(a.regions[i].polygon[j], b.regions[i].polygon[j]);
  }
  EXPECT_EQ(a.seed, b.seed);
  EXPECT_EQ(a.roughness, b.roughness);
  EXPECT_EQ(a.elevation, b.elevation);
  EXPECT_EQ(a.color_jitter, b.color_jitter);
  EXPECT_EQ(a.base_color, b.base_color);
  EXPECT_EQ(a.yellow_grass_color, b.yellow_grass_color);
  EXPECT_EQ(a.haze_distance, b.haze_distance);
  EXPECT_EQ(a.pose_error_deg, b.pose_error_deg);
  EXPECT_EQ(a.yellow_grass.size(), b.yellow_grass.size());
  const Scene sa = generate_scene(a), sb = generate_scene(b);
  EXPECT_EQ(sa.cloud.labels(), sb.cloud.labels());
}

TEST(Scene, SpecFileErrorsNameTheLine) {
  TempDir dir("scene_bad");
  {
    std::ofstream os(dir / "bad.cfg");
    os << "extent = 10 10\nregion = lava : 0 0 1 0 1 1\n";
  }
  try {
    read_scene_spec(dir / "bad.cfg");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
}

TEST(Flight, SpacingRealizesOverlap) {
  FlightSpec f;
  f.altitude = 100.0;
  f.scale = 1.0;
  f.overlap = 0.75;
  f.image_width = 100;
  f.image_height = 100;
  f.fx = f.fy = 100.0;  // 100 m footprint
  const auto plan = plan_flight(f, 300.0, 300.0);
  ASSERT_GE(plan.views.size(), 2u);
  EXPECT_NEAR(std::abs(plan.views[1].center().x() - plan.views[0].center().x()), 25.0, 1e-9);
  for (const auto& v : plan.views) {
    EXPECT_NO_THROW(v.validate());
    EXPECT_NEAR((v.rotation * v.rotation.transpose() - Eigen::Matrix3d::Identity()).norm(), 0.0, 1e-12);
  }
}

TEST(Flight, SmallExtentGivesSingleCenteredView) {
  FlightSpec f;
  const auto plan = plan_flight(f, 5.0, 5.0);
  ASSERT_EQ(plan.views.size(), 1u);
  EXPECT_FALSE(plan.warnings.empty());
  EXPECT_NEAR(plan.views[0].center().x(), 2.5, 1e-12);
  EXPECT_NEAR(plan.views[0].center().y(), 2.5, 1e-12);
}

TEST(Flight, RejectsOutOfWindowSettings) {
  FlightSpec f;
  f.overlap = 0.5;
  EXPECT_THROW(plan_flight(f, 100, 100), ConfigError);
  f.overlap = 0.8;
  f.altitude = 50;
  EXPECT_THROW(plan_flight(f, 100, 100), ConfigError);
}

TEST(Flight, EveryGroundSampleSeenThreeTimes) {
  for (const double overlap : {0.70, 0.78, 0.85}) {
    for (const double altitude : {70.0, 280.0, 400.0}) {
      FlightSpec f;
      f.altitude = altitude;
      f.overlap = overlap;
      const double extent = 2.5 * f.footprint_x();
      const auto plan = plan_flight(f, extent, extent);
      for (double x = 0.0; x <= extent; x += extent / 40) {
        for (double y = 0.0; y <= extent; y += extent / 40) {
          int seen = 0;
          for (const auto& v : plan.views) {
            const auto p = project(v, Eigen::Vector3d(x, y, 0.0));
            if (p && p->pixel.x() >= 0 && p->pixel.y() >= 0 && p->pixel.x() < v.width && p->pixel.y() < v.height) ++seen;
          }
          ASSERT_GE(seen, 3) << "overlap " << overlap << " altitude " << altitude << " at " << x << "," << y;
        }
      }
    }
  }
}

TEST(RenderDataset, MasksMatchRayCastOracle) {
  const SceneSpec s = small_spec(7);
  const Scene scene = generate_scene(s);
  const std::vector<CameraView> views{
      groundseg::testing::nadir_camera({10, 10, 14}, 40, 30, 30.0, "a"),
      groundseg::testing::look_at_camera({-4, 3, 9}, {10, 10, 0}, 40, 30, 30.0, "b")};
  const auto renders = render_dataset(views, scene.mesh, s);
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto& r = renders[i];
    int covered = 0, agree = 0;
    for (int y = 0; y < 30; ++y) {
      for (int x = 0; x < 40; ++x) {
        const bool has = std::isfinite(r.depth.at(x, y));
        // Shared rasterization: depth, color and label coverage coincide.
        ASSERT_EQ(has, is_labeled(r.labels.at(x, y)));
        if (!has) {
          ASSERT_EQ(r.color.at(x, y), (Rgb{0, 0, 0}));
          continue;
        }
        const auto hit = groundseg::testing::raycast_pixel(views[i], scene.mesh, x, y);
        if (hit.triangle < 0) continue;
        ++covered;
        agree += r.labels.at(x, y) == *region_label(s, hit.point.x(), hit.point.y()) &&
                 std::abs(r.depth.at(x, y) - hit.t) <= 1e-5;
      }
    }
    ASSERT_GT(covered, 500);
    EXPECT_GE(static_cast<double>(agree) / covered, 0.999) << views[i].image_id;
  }
}

TEST(PerturbPoses, ZeroErrorIsIdentity) {
  SceneSpec s = small_spec(8);
  s.pose_error_deg = 0.0;
  const std::vector<CameraView> views{groundseg::testing::nadir_camera({10, 10, 14}, 40, 30, 30.0, "a")};
  const auto out = perturb_poses(views, s);
  EXPECT_EQ(out[0].rotation, views[0].rotation);
  EXPECT_EQ(out[0].translation, views[0].translation);
}

TEST(PerturbPoses, KeepsCentersAndMatchesAngleSpread) {
  SceneSpec s = small_spec(8);
  s.pose_error_deg = 2.0;
  std::vector<CameraView> views;
  for (int i = 0; i < 4000; ++i) {
    views.push_back(groundseg::testing::look_at_camera({i * 0.01, 3, 20}, {5, 5, 0}, 40, 30, 30.0, "v"));
  }
  const auto out = perturb_poses(views, s);
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < views.size(); ++i) {
    ASSERT_LT((out[i].center() - views[i].center()).norm(), 1e-9);
    ASSERT_LT((out[i].rotation * out[i].rotation.transpose() - Eigen::Matrix3d::Identity()).norm(), 1e-12);
    const Eigen::Matrix3d d = out[i].rotation * views[i].rotation.transpose();
    const double angle = std::acos(std::clamp((d.trace() - 1.0) / 2.0, -1.0, 1.0)) * 180.0 / std::numbers::pi;
    sum_sq += angle * angle;
  }
  // The rotation vector has three independent components: E[angle^2] = 3 sd^2.
  EXPECT_NEAR(sum_sq / views.size(), 3.0 * 4.0, 0.6);
  // Same spec, same perturbation.
  EXPECT_EQ(perturb_poses(views, s)[17].rotation, out[17].rotation);
}
