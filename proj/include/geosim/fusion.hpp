#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geosim/geometry.hpp"

namespace geosim {

enum class ObjectClass : std::uint8_t { person = 0, e_gator = 1, pickup_truck = 2 };

const char* to_string(ObjectClass c);
ObjectClass object_class_from_string(const std::string& name);

struct Detection2D {
  double u_min = 0.0, v_min = 0.0, u_max = 0.0, v_max = 0.0;
  ObjectClass class_label = ObjectClass::person;
  double confidence = 1.0;
  int module_index = 0;
  double timestamp = 0.0;

  Vec2 center() const { return Vec2((u_min + u_max) / 2.0, (v_min + v_max) / 2.0); }
};

/// Stereo point in the camera frame together with the pixel it projects to.
struct CloudPoint {
  Vec3 point_cam{0.0, 0.0, 0.0};
  Vec2 pixel{0.0, 0.0};
};

struct PointCloudCam {
  std::vector<CloudPoint> points;
};

struct DepthPolicy {
  int min_points = 10;
  double max_reliable_range = 150.0;
  double default_depth = 75.0;
};

struct CovarianceParams {
  double k_range = 4e-3;
  double k_bearing = 1e-4;
};

enum class DepthSource : std::uint8_t { stereo_median, default_depth };

/// One fused 3D observation in UTM.
struct Contact {
  Vec3 position_utm{0.0, 0.0, 0.0};
  Mat3 covariance_utm = Mat3::Identity();
  ObjectClass class_label = ObjectClass::person;
  double confidence = 1.0;
  int source_robot = 0;
  double timestamp = 0.0;
  DepthSource depth_source = DepthSource::default_depth;
};

/// Median depth of the cloud points that project inside the bounding box, or
/// the policy default when too few points or the median is beyond stereo
/// reach. Even counts take the lower-middle element.
std::pair<double, DepthSource> bbox_depth(const Detection2D& det,
                                          const PointCloudCam& cloud,
                                          const DepthPolicy& policy);

/// Covariance with principal axis along the bearing:
/// R * diag(k_range r^2, k_bearing r^2, k_bearing r^2) * R^T.
/// Throws std::domain_error for non-positive range.
Mat3 bearing_covariance(double range, const Vec3& bearing_unit_utm,
                        const CovarianceParams& params);

/// Fuses a 2D detection with the module's stereo cloud into a Contact: depth
/// from the box, position along the box-center ray, covariance aligned with
/// the robot-to-object bearing in UTM.
Contact make_contact(const Detection2D& det, const PointCloudCam& cloud,
                     const CameraIntrinsics& intr, const Extrinsics& extr,
                     const Pose& pose, const DepthPolicy& policy,
                     const CovarianceParams& params, int source_robot = 0);

}  // namespace geosim
