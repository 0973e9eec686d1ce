#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace geosim {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle to (-pi, pi].
double wrap_angle(double rad);

/// Pinhole camera in the rectified, undistorted domain. The focal length is
/// derived from the horizontal FOV; the vertical FOV is kept separately and
/// only gates visibility.
struct CameraIntrinsics {
  int width_px = 0;
  int height_px = 0;
  double hfov_rad = 0.0;
  double vfov_rad = 0.0;
  double focal_px = 0.0;
  Vec2 principal_point{0.0, 0.0};

  static CameraIntrinsics from_fov(int width_px, int height_px, double hfov_rad,
                                   double vfov_rad);
};

/// One sensor module: a pinhole camera mounted at a yaw offset from the
/// vehicle forward axis.
struct PodModule {
  CameraIntrinsics intrinsics;
  double yaw_offset_rad = 0.0;
};

/// Extra imagers carried per module, counted for pixel-throughput accounting
/// only (they are not simulated).
struct SensorBand {
  int width_px = 0;
  int height_px = 0;
  int count = 1;
};

struct PodConfig {
  std::vector<PodModule> modules;
  double overlap_rad = 0.0;
  double total_hfov_rad = 0.0;
  // Per-module imager inventory for throughput accounting. Defaults to the
  // single logical camera when left empty.
  std::vector<SensorBand> sensors_per_module;
};

/// Builds a pod of identical modules with yaw offsets symmetric about the
/// vehicle forward axis. Module 0 has the most negative (clockwise) offset.
/// Throws ConfigError if the pod would cover more than a full circle.
PodConfig make_pod(int module_count, double module_hfov_rad, double overlap_rad,
                   const CameraIntrinsics& module_intrinsics);

/// Vehicle pose in the flat local UTM frame: x east, y north, z up.
struct Pose {
  Vec3 position_utm{0.0, 0.0, 0.0};
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
  double timestamp = 0.0;

  /// Body-to-world rotation, Rz(yaw) * Ry(pitch) * Rx(roll).
  Mat3 rotation() const;
};

/// Camera pose relative to the vehicle body frame.
struct Extrinsics {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation{0.0, 0.0, 0.0};

  /// Camera looking along the vehicle x axis rotated by `yaw_offset`, mounted
  /// at `mount` in the body frame. Camera axes: +z forward, +x right (+u),
  /// +y down (+v).
  static Extrinsics forward_camera(double yaw_offset_rad, const Vec3& mount);

  /// Nadir camera: optical axis straight down, image top toward vehicle
  /// forward.
  static Extrinsics nadir_camera(const Vec3& mount);
};

struct PixelPoint {
  Vec2 px{0.0, 0.0};
  bool in_frame = false;
};

/// Projects a camera-frame point. Throws std::domain_error when the point is
/// at or behind the camera plane (z <= 0).
PixelPoint project(const Vec3& point_camera, const CameraIntrinsics& intr);

/// Inverse of project at a given depth. Throws std::domain_error for
/// non-positive depth.
Vec3 backproject(const Vec2& pixel, double depth, const CameraIntrinsics& intr);

/// p_utm = R_pose * (R_extr * p_cam + t_extr) + t_pose
Vec3 camera_to_global(const Vec3& point_camera, const Extrinsics& extr,
                      const Pose& pose);

/// Indices of pod modules whose FOV wedge contains the target, range-gated.
/// Visibility is evaluated from the vehicle origin (mount offsets are small
/// against the ranges involved).
std::vector<int> visible_modules(const Vec3& target_utm, const Pose& pose,
                                 const PodConfig& pod, double max_range);

}  // namespace geosim
