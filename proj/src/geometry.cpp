#include "geosim/geometry.hpp"

#include <cmath>
#include <stdexcept>

#include "geosim/errors.hpp"

namespace geosim {

double wrap_angle(double rad) {
  double a = std::fmod(rad, 2.0 * kPi);
  if (a > kPi) a -= 2.0 * kPi;
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

CameraIntrinsics CameraIntrinsics::from_fov(int width_px, int height_px,
                                            double hfov_rad, double vfov_rad) {
  if (width_px <= 0 || height_px <= 0) {
    throw ConfigError("camera resolution must be positive");
  }
  if (!(hfov_rad > 0.0 && hfov_rad < kPi)) {
    throw ConfigError("horizontal FOV must lie in (0, pi)");
  }
  CameraIntrinsics intr;
  intr.width_px = width_px;
  intr.height_px = height_px;
  intr.hfov_rad = hfov_rad;
  intr.vfov_rad = vfov_rad;
  intr.focal_px = width_px / (2.0 * std::tan(hfov_rad / 2.0));
  intr.principal_point = Vec2(width_px / 2.0, height_px / 2.0);
  return intr;
}

PodConfig make_pod(int module_count, double module_hfov_rad, double overlap_rad,
                   const CameraIntrinsics& module_intrinsics) {
  if (module_count < 1) throw ConfigError("pod needs at least one module");
  if (overlap_rad < 0.0 || overlap_rad >= module_hfov_rad) {
    throw ConfigError("module overlap must satisfy 0 <= overlap < hfov");
  }
  const double total =
      module_count * module_hfov_rad - (module_count - 1) * overlap_rad;
  if (total > 2.0 * kPi) {
    throw ConfigError("pod horizontal FOV exceeds a full circle");
  }

  PodConfig pod;
  pod.overlap_rad = overlap_rad;
  pod.total_hfov_rad = total;
  const double spacing = module_hfov_rad - overlap_rad;
  for (int i = 0; i < module_count; ++i) {
    PodModule m;
    m.intrinsics = module_intrinsics;
    m.yaw_offset_rad = (i - (module_count - 1) / 2.0) * spacing;
    pod.modules.push_back(m);
  }
  return pod;
}

Mat3 Pose::rotation() const {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
          Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

Extrinsics Extrinsics::forward_camera(double yaw_offset_rad, const Vec3& mount) {
  // Columns map camera axes into the body frame: +x_cam -> -y_body,
  // +y_cam -> -z_body, +z_cam -> +x_body, then yawed about body z.
  Mat3 cam_to_body;
  cam_to_body << 0, 0, 1,
                -1, 0, 0,
                 0, -1, 0;
  Extrinsics e;
  e.rotation =
      Eigen::AngleAxisd(yaw_offset_rad, Vec3::UnitZ()).toRotationMatrix() *
      cam_to_body;
  e.translation = mount;
  return e;
}

Extrinsics Extrinsics::nadir_camera(const Vec3& mount) {
  Mat3 cam_to_body;
  cam_to_body << 0, -1, 0,
                -1, 0, 0,
                 0, 0, -1;
  Extrinsics e;
  e.rotation = cam_to_body;
  e.translation = mount;
  return e;
}

PixelPoint project(const Vec3& point_camera, const CameraIntrinsics& intr) {
  if (point_camera.z() <= 0.0) {
    throw std::domain_error("project: point at or behind camera plane");
  }
  PixelPoint out;
  out.px = intr.principal_point +
           intr.focal_px * Vec2(point_camera.x() / point_camera.z(),
                                point_camera.y() / point_camera.z());
  out.in_frame = out.px.x() >= 0.0 && out.px.x() <= intr.width_px &&
                 out.px.y() >= 0.0 && out.px.y() <= intr.height_px;
  return out;
}

Vec3 backproject(const Vec2& pixel, double depth, const CameraIntrinsics& intr) {
  if (depth <= 0.0) throw std::domain_error("backproject: depth must be positive");
  const Vec2 offset = (pixel - intr.principal_point) / intr.focal_px;
  return Vec3(offset.x() * depth, offset.y() * depth, depth);
}

Vec3 camera_to_global(const Vec3& point_camera, const Extrinsics& extr,
                      const Pose& pose) {
  return pose.rotation() * (extr.rotation * point_camera + extr.translation) +
         pose.position_utm;
}

std::vector<int> visible_modules(const Vec3& target_utm, const Pose& pose,
                                 const PodConfig& pod, double max_range) {
  std::vector<int> out;
  const Vec3 rel = target_utm - pose.position_utm;
  const double range = rel.norm();
  if (range > max_range || range == 0.0) return out;

  const Vec3 body = pose.rotation().transpose() * rel;
  const double bearing = std::atan2(body.y(), body.x());
  const double elevation =
      std::atan2(body.z(), std::hypot(body.x(), body.y()));

  for (int i = 0; i < static_cast<int>(pod.modules.size()); ++i) {
    const PodModule& m = pod.modules[i];
    const double off = wrap_angle(bearing - m.yaw_offset_rad);
    if (std::abs(off) <= m.intrinsics.hfov_rad / 2.0 &&
        std::abs(elevation) <= m.intrinsics.vfov_rad / 2.0) {
      out.push_back(i);
    }
  }
  return out;
}

}  // namespace geosim
