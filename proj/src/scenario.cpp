#include "geosim/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "geosim/errors.hpp"

namespace geosim {

namespace {

struct ClassShape {
  double radius;
  double height;
};

ClassShape shape_of(ObjectClass c) {
  switch (c) {
    case ObjectClass::person: return {0.3, 1.8};
    case ObjectClass::e_gator: return {1.2, 1.8};
    case ObjectClass::pickup_truck: return {2.5, 1.8};
  }
  return {0.5, 1.5};
}

}  // namespace

double World::height_at(double x, double y) const {
  const double cell = spec.heightfield_cell;
  double gx = x / cell;
  double gy = y / cell;
  gx = std::clamp(gx, 0.0, static_cast<double>(nx - 1));
  gy = std::clamp(gy, 0.0, static_cast<double>(ny - 1));
  const int ix0 = std::min(nx - 2, static_cast<int>(gx));
  const int iy0 = std::min(ny - 2, static_cast<int>(gy));
  const double fx = gx - ix0;
  const double fy = gy - iy0;
  const double h00 = grid_height(ix0, iy0);
  const double h10 = grid_height(ix0 + 1, iy0);
  const double h01 = grid_height(ix0, iy0 + 1);
  const double h11 = grid_height(ix0 + 1, iy0 + 1);
  return h00 * (1 - fx) * (1 - fy) + h10 * fx * (1 - fy) + h01 * (1 - fx) * fy +
         h11 * fx * fy;
}

PointCloudWorld World::terrain_cloud() const {
  PointCloudWorld cloud;
  cloud.points.reserve(static_cast<std::size_t>(nx) * ny);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      cloud.points.emplace_back(ix * spec.heightfield_cell,
                                iy * spec.heightfield_cell, grid_height(ix, iy));
    }
  }
  return cloud;
}

World gen_world(std::uint64_t seed, const WorldSpec& spec) {
  if (spec.size.x() <= 0.0 || spec.size.y() <= 0.0) {
    throw ConfigError("world dimensions must be positive");
  }
  if (spec.heightfield_cell <= 0.0) {
    throw ConfigError("heightfield cell must be positive");
  }

  World world;
  world.spec = spec;
  world.seed = seed;
  world.nx = static_cast<int>(std::llround(spec.size.x() / spec.heightfield_cell)) + 1;
  world.ny = static_cast<int>(std::llround(spec.size.y() / spec.heightfield_cell)) + 1;
  world.heights.assign(static_cast<std::size_t>(world.nx) * world.ny, 0.0);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  struct Wave {
    double dir, wavelength, phase;
  };
  std::array<Wave, 3> waves{};
  for (Wave& w : waves) {
    w.dir = 2.0 * kPi * unit(rng);
    w.wavelength = spec.base_wavelength * (0.7 + 0.6 * unit(rng));
    w.phase = 2.0 * kPi * unit(rng);
  }

  for (int iy = 0; iy < world.ny; ++iy) {
    for (int ix = 0; ix < world.nx; ++ix) {
      const double x = ix * spec.heightfield_cell;
      const double y = iy * spec.heightfield_cell;
      double h = 0.0;
      if (spec.base_amplitude > 0.0) {
        for (const Wave& w : waves) {
          h += (spec.base_amplitude / 3.0) *
               std::sin(2.0 * kPi * (x * std::cos(w.dir) + y * std::sin(w.dir)) /
                            w.wavelength +
                        w.phase);
        }
      }
      for (const RoughPatch& patch : spec.rough_patches) {
        const double d = (Vec2(x, y) - patch.center).norm();
        if (d < patch.radius) {
          const double falloff = 1.0 - (d / patch.radius) * (d / patch.radius);
          h += patch.amplitude * falloff *
               std::sin(2.0 * kPi * x / patch.wavelength) *
               std::sin(2.0 * kPi * y / patch.wavelength);
        }
      }
      world.heights[static_cast<std::size_t>(iy) * world.nx + ix] = h;
    }
  }

  auto inside_patch = [&](const Vec2& p) {
    for (const RoughPatch& patch : spec.rough_patches) {
      if ((p - patch.center).norm() < patch.radius + spec.min_spacing / 2.0) {
        return true;
      }
    }
    return false;
  };

  for (const WorldSpec::FixedObject& fixed : spec.fixed_objects) {
    WorldObject obj;
    obj.class_label = fixed.class_label;
    const ClassShape shape = shape_of(fixed.class_label);
    obj.footprint_radius = shape.radius;
    obj.height = shape.height;
    obj.position_utm = Vec3(fixed.position.x(), fixed.position.y(),
                            world.height_at(fixed.position.x(), fixed.position.y()));
    world.objects.push_back(obj);
  }

  const double margin = 5.0;
  int placed = 0;
  int attempts = 0;
  while (placed < spec.random_objects) {
    if (++attempts > 10000) {
      throw ConfigError("could not place objects at the requested spacing");
    }
    const Vec2 p(margin + unit(rng) * (spec.size.x() - 2 * margin),
                 margin + unit(rng) * (spec.size.y() - 2 * margin));
    if (inside_patch(p)) continue;
    bool ok = true;
    for (const WorldObject& other : world.objects) {
      if ((Vec2(other.position_utm.x(), other.position_utm.y()) - p).norm() <
          spec.min_spacing) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    WorldObject obj;
    obj.class_label = static_cast<ObjectClass>(placed % 3);
    const ClassShape shape = shape_of(obj.class_label);
    obj.footprint_radius = shape.radius;
    obj.height = shape.height;
    obj.position_utm = Vec3(p.x(), p.y(), world.height_at(p.x(), p.y()));
    world.objects.push_back(obj);
    placed += 1;
  }
  return world;
}

bool terrain_occludes(const World& world, const Vec3& from, const Vec3& to) {
  const double dist = (to - from).norm();
  const int steps = std::max(2, static_cast<int>(dist / 0.5));
  for (int i = 1; i < steps; ++i) {
    const double s = static_cast<double>(i) / steps;
    const Vec3 p = from + s * (to - from);
    if (world.height_at(p.x(), p.y()) > p.z()) return true;
  }
  return false;
}

std::optional<Vec3> ray_terrain_intersection(const World& world,
                                             const Vec3& origin, const Vec3& dir,
                                             double max_range) {
  const Vec3 d = dir.normalized();
  const double step = 0.5;
  double prev_t = 0.0;
  for (double t = step; t <= max_range; t += step) {
    const Vec3 p = origin + t * d;
    if (p.z() <= world.height_at(p.x(), p.y())) {
      // Bisect between the last above-ground sample and this one.
      double lo = prev_t, hi = t;
      for (int i = 0; i < 40; ++i) {
        const double mid = (lo + hi) / 2.0;
        const Vec3 q = origin + mid * d;
        if (q.z() <= world.height_at(q.x(), q.y())) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      return origin + hi * d;
    }
    prev_t = t;
  }
  return std::nullopt;
}

double SensingModel::p_detect_at(double range) const {
  if (p_detect.empty()) return 0.0;
  if (range <= p_detect.front().first) return p_detect.front().second;
  for (std::size_t i = 1; i < p_detect.size(); ++i) {
    if (range <= p_detect[i].first) {
      const auto& [r0, p0] = p_detect[i - 1];
      const auto& [r1, p1] = p_detect[i];
      const double f = (range - r0) / (r1 - r0);
      return p0 + f * (p1 - p0);
    }
  }
  return p_detect.back().second;
}

double stereo_depth_sigma(double depth, double focal_px, double baseline_m,
                          double disparity_noise_px) {
  return depth * depth * disparity_noise_px / (focal_px * baseline_m);
}

namespace {

Vec3 world_to_camera(const Vec3& point_utm, const Extrinsics& extr,
                     const Pose& pose) {
  return extr.rotation.transpose() *
         (pose.rotation().transpose() * (point_utm - pose.position_utm) -
          extr.translation);
}

}  // namespace

std::vector<Detection2D> simulate_detector(const Pose& pose, const PodConfig& pod,
                                           const std::vector<Extrinsics>& extrinsics,
                                           const World& world,
                                           const SensingModel& model,
                                           std::mt19937_64& rng, double t) {
  std::vector<Detection2D> detections;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> pixel_noise(0.0, 1.0);

  const Vec3 mount =
      extrinsics.empty() ? Vec3(0.0, 0.0, 1.5) : extrinsics.front().translation;
  const Vec3 sensor_origin = pose.position_utm + pose.rotation() * mount;

  for (const WorldObject& obj : world.objects) {
    const Vec3 center = obj.position_utm + Vec3(0.0, 0.0, obj.height / 2.0);
    const std::vector<int> modules =
        visible_modules(center, pose, pod, model.max_detect_range);
    if (modules.empty()) continue;
    if (terrain_occludes(world, sensor_origin, center)) continue;

    const double range = (center - pose.position_utm).norm();
    if (unit(rng) >= model.p_detect_at(range)) continue;

    // Overlap regions see the object in two modules; emit in the better
    // aligned one so a single physical object yields a single detection.
    const Vec3 body = pose.rotation().transpose() * (center - pose.position_utm);
    const double bearing = std::atan2(body.y(), body.x());
    int best = modules.front();
    double best_off = std::abs(
        wrap_angle(bearing - pod.modules[best].yaw_offset_rad));
    for (int m : modules) {
      const double off = std::abs(wrap_angle(bearing - pod.modules[m].yaw_offset_rad));
      if (off < best_off) {
        best = m;
        best_off = off;
      }
    }

    const CameraIntrinsics& intr = pod.modules[best].intrinsics;
    const Vec3 cam = world_to_camera(center, extrinsics[best], pose);
    if (cam.z() <= 0.0) continue;
    const PixelPoint center_px = project(cam, intr);

    const double half_w = intr.focal_px * obj.footprint_radius / cam.z();
    const double half_h = intr.focal_px * (obj.height / 2.0) / cam.z();
    double u_min = center_px.px.x() - half_w;
    double u_max = center_px.px.x() + half_w;
    double v_min = center_px.px.y() - half_h;
    double v_max = center_px.px.y() + half_h;
    if (model.bbox_noise_px > 0.0) {
      u_min += model.bbox_noise_px * pixel_noise(rng);
      u_max += model.bbox_noise_px * pixel_noise(rng);
      v_min += model.bbox_noise_px * pixel_noise(rng);
      v_max += model.bbox_noise_px * pixel_noise(rng);
    }
    u_min = std::clamp(u_min, 0.0, static_cast<double>(intr.width_px));
    u_max = std::clamp(u_max, 0.0, static_cast<double>(intr.width_px));
    v_min = std::clamp(v_min, 0.0, static_cast<double>(intr.height_px));
    v_max = std::clamp(v_max, 0.0, static_cast<double>(intr.height_px));
    if (u_max - u_min < 1.0 || v_max - v_min < 1.0) continue;

    Detection2D det;
    det.u_min = u_min;
    det.v_min = v_min;
    det.u_max = u_max;
    det.v_max = v_max;
    det.class_label = obj.class_label;
    det.confidence = 0.9;
    det.module_index = best;
    det.timestamp = t;
    detections.push_back(det);
  }

  if (model.clutter_rate > 0.0) {
    std::poisson_distribution<int> clutter_count(model.clutter_rate);
    for (int m = 0; m < static_cast<int>(pod.modules.size()); ++m) {
      const CameraIntrinsics& intr = pod.modules[m].intrinsics;
      const int k = clutter_count(rng);
      for (int i = 0; i < k; ++i) {
        const double cu = unit(rng) * intr.width_px;
        const double cv = unit(rng) * intr.height_px;
        const double hw = 10.0 + 50.0 * unit(rng);
        const double hh = 20.0 + 60.0 * unit(rng);
        Detection2D det;
        det.u_min = std::clamp(cu - hw, 0.0, static_cast<double>(intr.width_px));
        det.u_max = std::clamp(cu + hw, 0.0, static_cast<double>(intr.width_px));
        det.v_min = std::clamp(cv - hh, 0.0, static_cast<double>(intr.height_px));
        det.v_max = std::clamp(cv + hh, 0.0, static_cast<double>(intr.height_px));
        det.class_label = static_cast<ObjectClass>(
            std::min(2, static_cast<int>(unit(rng) * 3.0)));
        det.confidence = 0.4;
        det.module_index = m;
        det.timestamp = t;
        if (det.u_max - det.u_min >= 1.0 && det.v_max - det.v_min >= 1.0) {
          detections.push_back(det);
        }
      }
    }
  }
  return detections;
}

PointCloudCam simulate_stereo_cloud(const Pose& pose, const PodConfig& pod,
                                    int module_index, const Extrinsics& extr,
                                    const World& world, const SensingModel& model,
                                    std::mt19937_64& rng) {
  PointCloudCam cloud;
  const CameraIntrinsics& intr = pod.modules[module_index].intrinsics;
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto push_noisy = [&](const Vec2& pixel, double depth) {
    double z = depth;
    if (model.disparity_noise_px > 0.0) {
      z += stereo_depth_sigma(depth, intr.focal_px, model.stereo_baseline,
                              model.disparity_noise_px) *
           gauss(rng);
    }
    if (z <= 0.1) return;
    cloud.points.push_back({backproject(pixel, z, intr), pixel});
  };

  // Coarse terrain fan over the lower half of the frame.
  const Mat3 cam_to_world = pose.rotation() * extr.rotation;
  const Vec3 cam_origin = pose.position_utm + pose.rotation() * extr.translation;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 5; ++j) {
      const Vec2 px((i + 0.5) / 8.0 * intr.width_px,
                    (0.55 + 0.09 * j) * intr.height_px);
      const Vec3 dir_cam = backproject(px, 1.0, intr).normalized();
      const Vec3 dir_world = cam_to_world * dir_cam;
      const auto hit =
          ray_terrain_intersection(world, cam_origin, dir_world, 160.0);
      if (!hit.has_value()) continue;
      const double depth = (*hit - cam_origin).dot(cam_to_world.col(2));
      if (depth > 0.2) push_noisy(px, depth);
    }
  }

  // Dense points on each visible object's center plane.
  const Vec3 sensor_origin = cam_origin;
  for (const WorldObject& obj : world.objects) {
    const Vec3 center = obj.position_utm + Vec3(0.0, 0.0, obj.height / 2.0);
    const Vec3 cam = world_to_camera(center, extr, pose);
    if (cam.z() <= 0.5) continue;
    if (cam.norm() > model.max_detect_range) continue;
    const PixelPoint center_px = project(cam, intr);
    if (!center_px.in_frame) continue;
    if (terrain_occludes(world, sensor_origin, center)) continue;

    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 8; ++j) {
        const double dx = (-0.8 + 0.4 * i) * obj.footprint_radius;
        const double dy = (-0.8 + (1.6 / 7.0) * j) * obj.height / 2.0;
        const Vec3 p = cam + Vec3(dx, dy, 0.0);
        const PixelPoint px = project(p, intr);
        push_noisy(px.px, p.z());
      }
    }
  }
  return cloud;
}

Pose simulate_pose(const Pose& true_pose, const SensingModel& model,
                   std::mt19937_64& rng) {
  Pose out = true_pose;
  std::normal_distribution<double> gauss(0.0, 1.0);
  if (model.pose_sigma_pos > 0.0) {
    out.position_utm += model.pose_sigma_pos *
                        Vec3(gauss(rng), gauss(rng), gauss(rng));
  }
  if (model.pose_sigma_heading > 0.0) {
    out.yaw += model.pose_sigma_heading * gauss(rng);
  }
  return out;
}

StageTimes pipeline_latency(const PipelineModel& model, std::uint64_t seed,
                            long long frame_index) {
  std::mt19937_64 rng(seed ^
                      (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(frame_index + 1)));
  auto draw = [&](const PipelineStage& stage) {
    double t = stage.mean;
    if (stage.jitter > 0.0) {
      std::uniform_real_distribution<double> jitter(-stage.jitter, stage.jitter);
      t += jitter(rng);
    }
    return std::max(0.0, t);
  };

  StageTimes out;
  out.trigger_to_capture = draw(model.trigger_to_capture);
  out.capture_to_cpu = draw(model.capture_to_cpu);
  out.preprocess = draw(model.preprocess);
  out.stereo_pointcloud = draw(model.stereo_pointcloud);
  out.transfer = draw(model.transfer);
  out.detection = draw(model.detection);
  out.localization_3d = draw(model.localization_3d);
  out.end_to_end = out.trigger_to_capture + out.capture_to_cpu +
                   std::max(out.preprocess + out.detection,
                            out.stereo_pointcloud + out.transfer) +
                   out.localization_3d;
  return out;
}

double throughput_pixels_per_s(const PodConfig& pod, double capture_rate) {
  double pixels = 0.0;
  for (const PodModule& module : pod.modules) {
    if (pod.sensors_per_module.empty()) {
      pixels += static_cast<double>(module.intrinsics.width_px) *
                module.intrinsics.height_px;
    } else {
      for (const SensorBand& band : pod.sensors_per_module) {
        pixels += static_cast<double>(band.width_px) * band.height_px * band.count;
      }
    }
  }
  return pixels * capture_rate;
}

TrackScore score_tracks(const std::vector<std::pair<ObjectClass, Vec3>>& estimates,
                        const World& world, double match_radius) {
  TrackScore score;
  const int n_est = static_cast<int>(estimates.size());
  const int n_obj = static_cast<int>(world.objects.size());
  if (n_est == 0 && n_obj == 0) {
    score.vacuous = true;
    return score;
  }

  struct Pair {
    double d;
    int est;
    int obj;
  };
  std::vector<Pair> pairs;
  for (int i = 0; i < n_est; ++i) {
    for (int j = 0; j < n_obj; ++j) {
      if (estimates[i].first != world.objects[j].class_label) continue;
      const Vec3& a = estimates[i].second;
      const Vec3& b = world.objects[j].position_utm;
      // Horizontal distance: the picture is a 2D map product.
      const double d = std::hypot(a.x() - b.x(), a.y() - b.y());
      if (d <= match_radius) pairs.push_back({d, i, j});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.d != b.d) return a.d < b.d;
    if (a.est != b.est) return a.est < b.est;
    return a.obj < b.obj;
  });

  std::vector<char> est_used(n_est, false), obj_used(n_obj, false);
  double err_sum = 0.0;
  for (const Pair& p : pairs) {
    if (est_used[p.est] || obj_used[p.obj]) continue;
    est_used[p.est] = true;
    obj_used[p.obj] = true;
    score.matched += 1;
    err_sum += p.d;
    score.error_max = std::max(score.error_max, p.d);
  }
  score.precision = n_est == 0 ? 1.0 : static_cast<double>(score.matched) / n_est;
  score.recall = n_obj == 0 ? 1.0 : static_cast<double>(score.matched) / n_obj;
  score.error_mean = score.matched == 0 ? 0.0 : err_sum / score.matched;
  return score;
}

std::string tracks_to_geojson(
    const std::vector<std::pair<std::uint32_t, Track>>& tracks) {
  std::string out = "{\"type\":\"FeatureCollection\",\"features\":[";
  char buf[320];
  bool first = true;
  for (const auto& [robot_id, track] : tracks) {
    if (!first) out += ",";
    first = false;
    std::snprintf(buf, sizeof(buf),
                  "{\"type\":\"Feature\",\"properties\":{\"robot\":%u,\"track\":%"
                  "d,\"class\":\"%s\",\"matches\":%d},\"geometry\":{\"type\":"
                  "\"Point\",\"coordinates\":[%.6f,%.6f,%.6f]}}",
                  robot_id, track.track_id, to_string(track.class_label),
                  track.update_count, track.mean_utm.x(), track.mean_utm.y(),
                  track.mean_utm.z());
    out += buf;
  }
  out += "]}";
  return out;
}

}  // namespace geosim
