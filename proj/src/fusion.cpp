#include "geosim/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "geosim/errors.hpp"

namespace geosim {

const char* to_string(ObjectClass c) {
  switch (c) {
    case ObjectClass::person: return "person";
    case ObjectClass::e_gator: return "e_gator";
    case ObjectClass::pickup_truck: return "pickup_truck";
  }
  return "unknown";
}

ObjectClass object_class_from_string(const std::string& name) {
  if (name == "person") return ObjectClass::person;
  if (name == "e_gator") return ObjectClass::e_gator;
  if (name == "pickup_truck") return ObjectClass::pickup_truck;
  throw ConfigError("unknown object class: " + name);
}

std::pair<double, DepthSource> bbox_depth(const Detection2D& det,
                                          const PointCloudCam& cloud,
                                          const DepthPolicy& policy) {
  std::vector<double> depths;
  for (const CloudPoint& p : cloud.points) {
    if (p.pixel.x() >= det.u_min && p.pixel.x() <= det.u_max &&
        p.pixel.y() >= det.v_min && p.pixel.y() <= det.v_max) {
      depths.push_back(p.point_cam.z());
    }
  }
  if (static_cast<int>(depths.size()) >= policy.min_points) {
    // Lower-middle element; nth_element keeps this O(n).
    const std::size_t mid = (depths.size() - 1) / 2;
    std::nth_element(depths.begin(), depths.begin() + mid, depths.end());
    const double median = depths[mid];
    if (median <= policy.max_reliable_range) {
      return {median, DepthSource::stereo_median};
    }
  }
  return {policy.default_depth, DepthSource::default_depth};
}

Mat3 bearing_covariance(double range, const Vec3& bearing_unit_utm,
                        const CovarianceParams& params) {
  if (!(range > 0.0)) {
    throw std::domain_error("bearing_covariance: degenerate zero-range observation");
  }
  const Vec3 b = bearing_unit_utm;
  // Complete b to a right-handed orthonormal basis.
  const Vec3 helper =
      std::abs(b.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  const Vec3 c2 = b.cross(helper).normalized();
  const Vec3 c3 = b.cross(c2);
  Mat3 rot;
  rot.col(0) = b;
  rot.col(1) = c2;
  rot.col(2) = c3;

  const double r2 = range * range;
  Vec3 diag(params.k_range * r2, params.k_bearing * r2, params.k_bearing * r2);
  return rot * diag.asDiagonal() * rot.transpose();
}

Contact make_contact(const Detection2D& det, const PointCloudCam& cloud,
                     const CameraIntrinsics& intr, const Extrinsics& extr,
                     const Pose& pose, const DepthPolicy& policy,
                     const CovarianceParams& params, int source_robot) {
  const auto [depth, source] = bbox_depth(det, cloud, policy);
  const Vec3 point_cam = backproject(det.center(), depth, intr);
  const Vec3 position = camera_to_global(point_cam, extr, pose);

  const Vec3 offset = position - pose.position_utm;
  const double range = offset.norm();
  if (!(range > 0.0)) {
    throw std::domain_error("make_contact: object coincides with robot position");
  }

  Contact c;
  c.position_utm = position;
  c.covariance_utm = bearing_covariance(range, offset / range, params);
  c.class_label = det.class_label;
  c.confidence = det.confidence;
  c.source_robot = source_robot;
  c.timestamp = det.timestamp;
  c.depth_source = source;
  return c;
}

}  // namespace geosim
