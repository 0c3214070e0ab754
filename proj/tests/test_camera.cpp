#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include "groundseg/camera.hpp"
#include "groundseg/error.hpp"
#include "support.hpp"

using namespace groundseg;

namespace {

CameraView intrinsics_only() {
  CameraView v;
  v.image_id = "c";
  v.width = 640;
  v.height = 480;
  v.fx = v.fy = 100.0;
  v.cx = 320.0;
  v.cy = 240.0;
  return v;
}

CameraView random_view(Rng& rng) {
  CameraView v;
  v.image_id = "r";
  v.width = 50 + static_cast<int>(rng.below(600));
  v.height = 50 + static_cast<int>(rng.below(400));
  v.fx = rng.uniform(20.0, 2000.0);
  v.fy = v.fx * rng.uniform(0.8, 1.2);
  v.cx = rng.uniform(0.0, v.width - 1.0);
  v.cy = rng.uniform(0.0, v.height - 1.0);
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  v.rotation = q.normalized().toRotationMatrix();
  v.translation = Eigen::Vector3d(rng.uniform(-500, 500), rng.uniform(-500, 500), rng.uniform(-500, 500));
  return v;
}

}  // namespace

TEST(Project, PrincipalPoint) {
  const auto p = project(intrinsics_only(), {0, 0, 5});
  ASSERT_TRUE(p);
  EXPECT_EQ(p->pixel, Eigen::Vector2d(320, 240));
  EXPECT_EQ(p->depth, 5.0);
}

TEST(Project, HandEvaluatedOffset) {
  const auto p = project(intrinsics_only(), {1, 0, 5});
  ASSERT_TRUE(p);
  EXPECT_DOUBLE_EQ(p->pixel.x(), 340.0);
  EXPECT_DOUBLE_EQ(p->pixel.y(), 240.0);
}

TEST(Project, BehindCamera) { EXPECT_FALSE(project(intrinsics_only(), {0, 0, -1})); }

TEST(ViewRay, PrincipalPointIsOpticalAxis) {
  EXPECT_EQ(view_ray(intrinsics_only(), {320, 240}), Eigen::Vector3d(0, 0, 1));
}

TEST(ViewRay, OutsideImageThrows) {
  EXPECT_THROW(view_ray(intrinsics_only(), {-1, 0}), ArgumentError);
  EXPECT_THROW(view_ray(intrinsics_only(), {0, 481}), ArgumentError);
}

TEST(ViewRay, RoundTripOnRandomViews) {
  Rng rng(17);
  for (int trial = 0; trial < 2000; ++trial) {
    const CameraView v = random_view(rng);
    ASSERT_NO_THROW(v.validate());
    const Eigen::Vector2d px(rng.uniform(0, v.width), rng.uniform(0, v.height));
    const Eigen::Vector3d d = view_ray(v, px);
    ASSERT_NEAR(d.norm(), 1.0, 1e-12);
    const double s = std::exp(rng.uniform(std::log(0.1), std::log(1000.0)));
    const auto p = project(v, v.center() + s * d);
    ASSERT_TRUE(p);
    ASSERT_LE((p->pixel - px).norm(), 1e-6) << "trial " << trial;
    // Depth is camera-frame z, i.e. the range scaled by the ray's axis cosine.
    const double cos_axis = v.rotation.row(2).dot(d);
    ASSERT_NEAR(p->depth, s * cos_axis, 1e-9 * s);
  }
}

TEST(NearestPixel, Bounds) {
  const CameraView v = intrinsics_only();
  EXPECT_EQ(*nearest_pixel(v, {0.0, 0.0}), Eigen::Vector2i(0, 0));
  EXPECT_EQ(*nearest_pixel(v, {639.99, 479.5}), Eigen::Vector2i(639, 479));
  EXPECT_FALSE(nearest_pixel(v, {640.0, 10.0}));
  EXPECT_FALSE(nearest_pixel(v, {-0.01, 10.0}));
}

TEST(CameraView, ValidateRejectsBadPoses) {
  CameraView v = intrinsics_only();
  EXPECT_NO_THROW(v.validate());
  v.rotation(0, 0) = 1.01;
  EXPECT_THROW(v.validate(), ArgumentError);
  v.rotation = -Eigen::Matrix3d::Identity();
  EXPECT_THROW(v.validate(), ArgumentError);
  v = intrinsics_only();
  v.cx = 640.0;
  EXPECT_THROW(v.validate(), ArgumentError);
}

TEST(CameraFile, RoundTrip) {
  groundseg::testing::TempDir dir("cams");
  Rng rng(2);
  std::vector<CameraView> views;
  for (int i = 0; i < 5; ++i) {
    views.push_back(random_view(rng));
    views.back().image_id = "img_" + std::to_string(i);
  }
  views[2].image_path = "images/img_2.ppm";
  write_cameras(views, dir / "cams.txt");
  const auto back = read_cameras(dir / "cams.txt");
  ASSERT_EQ(back.size(), views.size());
  for (std::size_t i = 0; i < views.size(); ++i) {
    EXPECT_EQ(back[i].image_id, views[i].image_id);
    EXPECT_EQ(back[i].rotation, views[i].rotation);
    EXPECT_EQ(back[i].translation, views[i].translation);
    EXPECT_EQ(back[i].fx, views[i].fx);
    EXPECT_EQ(back[i].cx, views[i].cx);
    EXPECT_EQ(back[i].image_path, views[i].image_path);
  }
}
