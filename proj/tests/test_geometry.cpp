#include "geosim/geometry.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "geosim/errors.hpp"

namespace geosim {
namespace {

CameraIntrinsics ugv_camera() {
  return CameraIntrinsics::from_fov(4096, 3000, deg2rad(48.0), deg2rad(36.0));
}

TEST(MakePod, FiveModulePodCoversWideField) {
  const PodConfig pod = make_pod(5, deg2rad(48.0), deg2rad(12.0), ugv_camera());
  EXPECT_EQ(pod.modules.size(), 5u);
  // 5*48 - 4*12 = 192, bit-exact in radians for these inputs.
  EXPECT_EQ(pod.total_hfov_rad, deg2rad(192.0));
  // Offsets symmetric about the forward axis, spaced hfov - overlap.
  EXPECT_NEAR(pod.modules[2].yaw_offset_rad, 0.0, 1e-15);
  for (int i = 0; i + 1 < 5; ++i) {
    EXPECT_NEAR(pod.modules[i + 1].yaw_offset_rad - pod.modules[i].yaw_offset_rad,
                deg2rad(36.0), 1e-12);
  }
}

TEST(MakePod, SingleModuleIgnoresOverlap) {
  const PodConfig pod = make_pod(1, deg2rad(48.0), deg2rad(12.0), ugv_camera());
  EXPECT_DOUBLE_EQ(pod.total_hfov_rad, deg2rad(48.0));
  EXPECT_DOUBLE_EQ(pod.modules[0].yaw_offset_rad, 0.0);
}

TEST(MakePod, TwoModules) {
  const PodConfig pod = make_pod(2, deg2rad(48.0), deg2rad(12.0), ugv_camera());
  EXPECT_NEAR(pod.total_hfov_rad, deg2rad(84.0), 1e-12);
}

TEST(MakePod, RejectsFullCircleOverflow) {
  EXPECT_THROW(make_pod(20, deg2rad(48.0), deg2rad(12.0), ugv_camera()),
               ConfigError);
  EXPECT_THROW(make_pod(0, deg2rad(48.0), deg2rad(12.0), ugv_camera()),
               ConfigError);
  EXPECT_THROW(make_pod(2, deg2rad(48.0), deg2rad(48.0), ugv_camera()),
               ConfigError);
}

TEST(MakePod, AdjacentModulesOverlapExactly) {
  const PodConfig pod = make_pod(5, deg2rad(48.0), deg2rad(12.0), ugv_camera());
  const double half = deg2rad(48.0) / 2.0;
  for (int i = 0; i + 1 < 5; ++i) {
    const double hi = pod.modules[i].yaw_offset_rad + half;
    const double lo = pod.modules[i + 1].yaw_offset_rad - half;
    EXPECT_NEAR(hi - lo, pod.overlap_rad, 1e-12);  // pairwise overlap width
  }
  const double lo = pod.modules.front().yaw_offset_rad - half;
  const double hi = pod.modules.back().yaw_offset_rad + half;
  EXPECT_NEAR(hi - lo, pod.total_hfov_rad, 1e-12);  // contiguous union
}

TEST(Intrinsics, FocalMatchesIndependentFormula) {
  const CameraIntrinsics intr = ugv_camera();
  const double expected = 4096.0 / (2.0 * std::tan(deg2rad(24.0)));
  EXPECT_NEAR(intr.focal_px, expected, expected * 1e-9);
  EXPECT_NEAR(intr.focal_px, 4599.883, 0.001);
  EXPECT_EQ(intr.principal_point, Vec2(2048.0, 1500.0));
}

TEST(Project, OpticalAxisHitsPrincipalPoint) {
  const CameraIntrinsics intr = ugv_camera();
  const PixelPoint px = project(Vec3(0.0, 0.0, 10.0), intr);
  EXPECT_NEAR(px.px.x(), 2048.0, 1e-12);
  EXPECT_NEAR(px.px.y(), 1500.0, 1e-12);
  EXPECT_TRUE(px.in_frame);
}

TEST(Project, OffsetScalesWithFocalOverDepth) {
  // Explicit intrinsics with the focal length given as an input.
  CameraIntrinsics intr = ugv_camera();
  intr.focal_px = 4603.7;
  const PixelPoint px = project(Vec3(1.0, 0.0, 10.0), intr);
  EXPECT_NEAR(px.px.x(), 2048.0 + 460.37, 1e-9);
  EXPECT_NEAR(px.px.y(), 1500.0, 1e-12);
}

TEST(Project, BehindCameraThrows) {
  const CameraIntrinsics intr = ugv_camera();
  EXPECT_THROW(project(Vec3(0.0, 0.0, 0.0), intr), std::domain_error);
  EXPECT_THROW(project(Vec3(1.0, 1.0, -5.0), intr), std::domain_error);
}

TEST(Project, FlagsOutOfFramePixels) {
  const CameraIntrinsics intr = ugv_camera();
  const PixelPoint px = project(Vec3(50.0, 0.0, 10.0), intr);
  EXPECT_FALSE(px.in_frame);
}

TEST(Backproject, PrincipalPointGoesToAxis) {
  const CameraIntrinsics intr = ugv_camera();
  const Vec3 p = backproject(Vec2(2048.0, 1500.0), 10.0, intr);
  EXPECT_NEAR((p - Vec3(0.0, 0.0, 10.0)).norm(), 0.0, 1e-12);
}

TEST(Backproject, InverseOfProjectExample) {
  CameraIntrinsics intr = ugv_camera();
  intr.focal_px = 4603.7;
  const Vec3 p = backproject(Vec2(2508.4, 1500.0), 10.0, intr);
  EXPECT_NEAR(p.x(), 1.0, 1e-3);
  EXPECT_NEAR(p.y(), 0.0, 1e-9);
  EXPECT_NEAR(p.z(), 10.0, 1e-12);
}

TEST(Backproject, RejectsNonPositiveDepth) {
  const CameraIntrinsics intr = ugv_camera();
  EXPECT_THROW(backproject(Vec2(100.0, 100.0), 0.0, intr), std::domain_error);
  EXPECT_THROW(backproject(Vec2(100.0, 100.0), -1.0, intr), std::domain_error);
}

TEST(Backproject, RoundTripProperty) {
  const CameraIntrinsics intr = ugv_camera();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const Vec2 px(u(rng) * intr.width_px, u(rng) * intr.height_px);
    const double depth = 1.0 + u(rng) * 499.0;
    const PixelPoint round = project(backproject(px, depth, intr), intr);
    EXPECT_NEAR((round.px - px).norm(), 0.0, 1e-6);
  }
}

TEST(CameraToGlobal, IdentityPassThrough) {
  const Pose pose;
  const Extrinsics extr;  // identity
  const Vec3 p(1.0, 2.0, 3.0);
  EXPECT_NEAR((camera_to_global(p, extr, pose) - p).norm(), 0.0, 1e-15);
}

TEST(CameraToGlobal, TranslationOnlyPose) {
  Pose pose;
  pose.position_utm = Vec3(100.0, 200.0, 0.0);
  const Extrinsics extr;
  const Vec3 p(1.0, 2.0, 3.0);
  EXPECT_NEAR((camera_to_global(p, extr, pose) - (p + pose.position_utm)).norm(),
              0.0, 1e-12);
}

TEST(CameraToGlobal, MatchesComposedMatrixOracle) {
  Pose pose;
  pose.position_utm = Vec3(10.0, -4.0, 2.0);
  pose.yaw = deg2rad(90.0);
  pose.pitch = deg2rad(5.0);
  pose.roll = deg2rad(-3.0);
  const Extrinsics extr =
      Extrinsics::forward_camera(deg2rad(36.0), Vec3(0.2, 0.0, 1.5));
  const Vec3 p_cam(0.0, 0.0, 1.0);

  // Independent composition of the same transform chain.
  const Mat3 rz = Eigen::AngleAxisd(pose.yaw, Vec3::UnitZ()).toRotationMatrix();
  const Mat3 ry = Eigen::AngleAxisd(pose.pitch, Vec3::UnitY()).toRotationMatrix();
  const Mat3 rx = Eigen::AngleAxisd(pose.roll, Vec3::UnitX()).toRotationMatrix();
  const Vec3 expected =
      rz * ry * rx * (extr.rotation * p_cam + extr.translation) +
      pose.position_utm;

  EXPECT_NEAR((camera_to_global(p_cam, extr, pose) - expected).norm(), 0.0, 1e-12);
}

TEST(CameraToGlobal, ForwardCameraLooksAlongBodyX) {
  const Extrinsics extr = Extrinsics::forward_camera(0.0, Vec3::Zero());
  const Pose pose;
  // One meter along the optical axis comes out one meter forward.
  EXPECT_NEAR(
      (camera_to_global(Vec3(0, 0, 1), extr, pose) - Vec3(1, 0, 0)).norm(), 0.0,
      1e-12);
  // +u (camera x) is to the right of the vehicle, i.e. -y.
  EXPECT_NEAR(
      (camera_to_global(Vec3(1, 0, 1), extr, pose) - Vec3(1, -1, 0)).norm(), 0.0,
      1e-12);
  EXPECT_NEAR(extr.rotation.determinant(), 1.0, 1e-12);
}

TEST(Pose, RotationIsProper) {
  Pose pose;
  pose.roll = 0.3;
  pose.pitch = -0.6;
  pose.yaw = 2.1;
  const Mat3 rot = pose.rotation();
  EXPECT_NEAR(rot.determinant(), 1.0, 1e-12);
  EXPECT_NEAR((rot * rot.transpose() - Mat3::Identity()).norm(), 0.0, 1e-12);
}

TEST(CameraToGlobal, IsometryProperty) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Pose pose;
  pose.position_utm = Vec3(40.0, -7.0, 1.0);
  pose.yaw = 1.1;
  pose.pitch = 0.2;
  pose.roll = -0.3;
  const Extrinsics extr =
      Extrinsics::forward_camera(deg2rad(-72.0), Vec3(0.1, -0.2, 1.4));
  for (int i = 0; i < 200; ++i) {
    const Vec3 a(u(rng) * 50, u(rng) * 50, u(rng) * 50);
    const Vec3 b(u(rng) * 50, u(rng) * 50, u(rng) * 50);
    const double before = (a - b).norm();
    const double after =
        (camera_to_global(a, extr, pose) - camera_to_global(b, extr, pose)).norm();
    EXPECT_NEAR(after, before, std::max(1.0, before) * 1e-9);
  }
}

class VisibleModulesTest : public ::testing::Test {
 protected:
  PodConfig pod_ = make_pod(5, deg2rad(48.0), deg2rad(12.0), ugv_camera());
  Pose pose_;  // identity at origin

  // Angular-arithmetic oracle over the module wedges.
  std::vector<int> oracle(const Vec3& target, double max_range) const {
    std::vector<int> out;
    const Vec3 rel = target - pose_.position_utm;
    if (rel.norm() > max_range || rel.norm() == 0.0) return out;
    const Vec3 body = pose_.rotation().transpose() * rel;
    const double bearing = std::atan2(body.y(), body.x());
    const double elev = std::atan2(body.z(), std::hypot(body.x(), body.y()));
    for (int i = 0; i < static_cast<int>(pod_.modules.size()); ++i) {
      const double off = wrap_angle(bearing - pod_.modules[i].yaw_offset_rad);
      if (std::abs(off) <= deg2rad(24.0) && std::abs(elev) <= deg2rad(18.0)) {
        out.push_back(i);
      }
    }
    return out;
  }
};

TEST_F(VisibleModulesTest, DeadAheadSeesMiddleModule) {
  const auto modules = visible_modules(Vec3(50.0, 0.0, 0.0), pose_, pod_, 200.0);
  ASSERT_EQ(modules.size(), 1u);
  EXPECT_EQ(modules[0], 2);  // center module of five
}

TEST_F(VisibleModulesTest, OverlapWedgeSeesTwoModules) {
  // 18 degrees off axis: inside module 2 (up to 24) and module 3 (from 12).
  const double bearing = deg2rad(18.0);
  const Vec3 target(50.0 * std::cos(bearing), 50.0 * std::sin(bearing), 0.0);
  const auto modules = visible_modules(target, pose_, pod_, 200.0);
  EXPECT_EQ(modules, (std::vector<int>{2, 3}));
}

TEST_F(VisibleModulesTest, BehindVehicleSeesNothing) {
  EXPECT_TRUE(visible_modules(Vec3(-50.0, 0.0, 0.0), pose_, pod_, 200.0).empty());
}

TEST_F(VisibleModulesTest, RangeGate) {
  EXPECT_TRUE(visible_modules(Vec3(500.0, 0.0, 0.0), pose_, pod_, 200.0).empty());
}

TEST_F(VisibleModulesTest, MatchesOracleOverSweep) {
  for (int deg = -180; deg <= 180; deg += 3) {
    const double b = deg2rad(static_cast<double>(deg));
    const Vec3 target(80.0 * std::cos(b), 80.0 * std::sin(b), 5.0);
    EXPECT_EQ(visible_modules(target, pose_, pod_, 150.0), oracle(target, 150.0))
        << "bearing " << deg;
  }
}

}  // namespace
}  // namespace geosim
