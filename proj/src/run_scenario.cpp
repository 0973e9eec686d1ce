#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "geosim/errors.hpp"
#include "geosim/scenario.hpp"

namespace geosim {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t robot, std::uint64_t tag) {
  std::uint64_t x = seed ^ (robot * 0x9e3779b97f4a7c15ULL) ^ (tag * 0xbf58476d1ce4e5b9ULL);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

Pose ugv_pose(const VehicleState& v, const World& world, double t) {
  Pose pose;
  pose.position_utm =
      Vec3(v.position.x(), v.position.y(),
           world.height_at(v.position.x(), v.position.y()));
  pose.yaw = v.heading;
  pose.timestamp = t;
  return pose;
}

struct PendingContacts {
  double release_time;
  std::vector<Contact> contacts;
};

struct PendingReport {
  double release_time;
  TrackReport report;
};

struct UgvRuntime {
  RobotConfig cfg;
  VehicleState vehicle;
  Trajectory trajectory;
  TrackDatabase db;
  LocalElevationGrid grid;
  Pose measured_pose;
  bool finished = false;
  std::mt19937_64 rng_detect, rng_stereo, rng_pose, rng_scan;
  std::vector<PendingContacts> pending;
  std::map<int, int> last_reported_count;
  long long frame = 0;
};

struct UavRuntime {
  RobotConfig cfg;
  Vec2 position{0.0, 0.0};
  double heading = 0.0;
  std::size_t waypoint_index = 0;
  Pose measured_pose;
  std::mt19937_64 rng_detect, rng_pose;
  std::vector<PendingReport> pending;
  // Previously reported positions for stable pseudo track ids.
  std::vector<std::pair<Vec3, std::uint32_t>> known;
  std::uint32_t next_id = 1;
  long long frame = 0;
};

/// Synthetic LIDAR: terrain fan around the vehicle plus rings on nearby
/// object cylinders.
std::vector<Vec3> simulate_lidar_scan(const Pose& pose, const World& world,
                                      double range_limit) {
  std::vector<Vec3> scan;
  for (int a = 0; a < 72; ++a) {
    const double az = 2.0 * kPi * a / 72.0;
    for (double r = 2.0; r <= range_limit; r += 2.0) {
      const double x = pose.position_utm.x() + r * std::cos(az);
      const double y = pose.position_utm.y() + r * std::sin(az);
      scan.emplace_back(x, y, world.height_at(x, y));
    }
  }
  for (const WorldObject& obj : world.objects) {
    const double d = (obj.position_utm - pose.position_utm).norm();
    if (d > range_limit) continue;
    for (int a = 0; a < 8; ++a) {
      const double az = 2.0 * kPi * a / 8.0;
      for (int k = 1; k <= 3; ++k) {
        scan.emplace_back(
            obj.position_utm.x() + obj.footprint_radius * std::cos(az),
            obj.position_utm.y() + obj.footprint_radius * std::sin(az),
            obj.position_utm.z() + obj.height * k / 4.0);
      }
    }
  }
  return scan;
}

bool path_blocked_ahead(const LocalElevationGrid& grid, const Trajectory& traj,
                        const VehicleState& vehicle, double distance,
                        double threshold) {
  if (traj.empty()) return false;
  std::size_t nearest = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < traj.points.size(); ++i) {
    const double dx = traj.points[i].x - vehicle.position.x();
    const double dy = traj.points[i].y - vehicle.position.y();
    const double d2 = dx * dx + dy * dy;
    if (d2 < best) {
      best = d2;
      nearest = i;
    }
  }
  const double s_end = traj.arc_length[nearest] + distance;
  for (std::size_t i = nearest; i < traj.points.size(); ++i) {
    if (traj.arc_length[i] > s_end) break;
    int ix, iy;
    if (!grid.index_of(Vec2(traj.points[i].x, traj.points[i].y), ix, iy)) continue;
    const ElevationCell& cell = grid.at(ix, iy);
    if (cell.count > 0 && cell.occupancy >= threshold) return true;
  }
  return false;
}

char event_code(TrackEventType type) {
  switch (type) {
    case TrackEventType::birth: return 'B';
    case TrackEventType::confirm: return 'C';
    case TrackEventType::death: return 'D';
  }
  return '?';
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& cfg) {
  const World world = gen_world(cfg.seed, cfg.world);
  const PointCloudWorld terrain = world.terrain_cloud();
  const CostMapGlobal costmap =
      build_global_costmap(terrain, cfg.roughness, cfg.costmap_cell);
  const PrimitiveSet prims = generate_primitives(
      cfg.min_turn_radius, cfg.arc_length, cfg.headings, cfg.costmap_cell);

  const CameraIntrinsics cam = CameraIntrinsics::from_fov(
      cfg.cam_width, cfg.cam_height, cfg.pod_hfov, cfg.pod_vfov);
  PodConfig pod = make_pod(cfg.pod_modules, cfg.pod_hfov, cfg.pod_overlap, cam);
  pod.sensors_per_module = cfg.sensors_per_module;
  std::vector<Extrinsics> pod_extr;
  for (const PodModule& module : pod.modules) {
    pod_extr.push_back(Extrinsics::forward_camera(
        module.yaw_offset_rad, Vec3(0.0, 0.0, cfg.pod_mount_height)));
  }

  const CameraIntrinsics uav_cam = CameraIntrinsics::from_fov(
      cfg.uav_cam_width, cfg.uav_cam_height, cfg.uav_hfov, cfg.uav_vfov);
  const Extrinsics uav_extr = Extrinsics::nadir_camera(Vec3(0.0, 0.0, -0.1));

  RunResult result;
  result.computed_throughput = throughput_pixels_per_s(pod, cfg.sensing.capture_rate);

  std::vector<UgvRuntime> ugvs;
  std::vector<UavRuntime> uavs;
  std::map<std::uint32_t, Link> links;

  for (const RobotConfig& robot : cfg.robots) {
    LinkModel link_model = cfg.link;
    link_model.rng_seed = mix_seed(cfg.seed, robot.id, 0x11);
    links.emplace(robot.id, Link(link_model));

    if (robot.kind == RobotKind::ugv) {
      UgvRuntime ugv;
      ugv.cfg = robot;
      ugv.vehicle.position = robot.start;
      ugv.vehicle.heading = robot.start_heading;
      ugv.trajectory = plan_route(ugv.vehicle, robot.waypoints, costmap, prims,
                                  cfg.eps, cfg.goal_tolerance);
      ugv.db.params = cfg.tracker;
      ugv.grid = LocalElevationGrid(cfg.local_grid_cells, cfg.local_grid_cells,
                                    cfg.local_grid_cell_size);
      ugv.rng_detect.seed(mix_seed(cfg.seed, robot.id, 0x21));
      ugv.rng_stereo.seed(mix_seed(cfg.seed, robot.id, 0x22));
      ugv.rng_pose.seed(mix_seed(cfg.seed, robot.id, 0x23));
      ugv.rng_scan.seed(mix_seed(cfg.seed, robot.id, 0x24));
      ugv.measured_pose = ugv_pose(ugv.vehicle, world, 0.0);
      ugvs.push_back(std::move(ugv));
    } else {
      UavRuntime uav;
      uav.cfg = robot;
      uav.position = robot.start;
      uav.heading = robot.start_heading;
      uav.rng_detect.seed(mix_seed(cfg.seed, robot.id, 0x31));
      uav.rng_pose.seed(mix_seed(cfg.seed, robot.id, 0x32));
      uavs.push_back(std::move(uav));
    }
  }

  std::vector<DeliveryEvent> events;
  auto send_report = [&](const TrackReport& report, double t) {
    events.push_back(links.at(report.robot_id).send(report, t));
  };

  char line[256];
  const long long duration_ms = static_cast<long long>(std::llround(cfg.duration * 1000.0));
  for (long long tick_ms = 0; tick_ms <= duration_ms; tick_ms += 5) {
    const double t = tick_ms / 1000.0;

    if (tick_ms % 20 == 0) {  // 50 Hz control + localization
      for (UgvRuntime& ugv : ugvs) {
        Pose true_pose = ugv_pose(ugv.vehicle, world, t);
        ugv.measured_pose = simulate_pose(true_pose, cfg.sensing, ugv.rng_pose);

        if (tick_ms % 100 == 0) {  // 10 Hz scan
          update_local_grid(ugv.grid,
                            simulate_lidar_scan(true_pose, world, cfg.lidar_range),
                            true_pose, cfg.lidar_range, cfg.voxel_size);
        }

        if (!ugv.finished) {
          auto cmd = pure_pursuit(ugv.vehicle, ugv.trajectory, cfg.lookahead,
                                  cfg.cruise_speed, cfg.min_turn_radius);
          if (!cmd.has_value()) {
            ugv.finished = true;
          } else {
            if (path_blocked_ahead(ugv.grid, ugv.trajectory, ugv.vehicle,
                                   cfg.lookahead, cfg.occupancy_threshold)) {
              cmd->speed = 0.0;  // hold until the path clears
            }
            ugv.vehicle = step_vehicle(ugv.vehicle, *cmd, 0.02);
          }
        }
      }
      for (UavRuntime& uav : uavs) {
        if (uav.waypoint_index < uav.cfg.waypoints.size()) {
          const Vec2 goal = uav.cfg.waypoints[uav.waypoint_index];
          const Vec2 delta = goal - uav.position;
          const double dist = delta.norm();
          const double step = uav.cfg.speed * 0.02;
          if (dist <= step) {
            uav.position = goal;
            uav.waypoint_index += 1;
          } else {
            uav.heading = std::atan2(delta.y(), delta.x());
            uav.position += delta * (step / dist);
          }
        }
        Pose true_pose;
        true_pose.position_utm =
            Vec3(uav.position.x(), uav.position.y(), uav.cfg.altitude);
        true_pose.yaw = uav.heading;
        true_pose.timestamp = t;
        uav.measured_pose = simulate_pose(true_pose, cfg.sensing, uav.rng_pose);
      }
    }

    if (tick_ms % 250 == 0) {  // 4 Hz captures
      for (UgvRuntime& ugv : ugvs) {
        const Pose true_pose = ugv_pose(ugv.vehicle, world, t);
        const StageTimes stages = pipeline_latency(
            cfg.pipeline, mix_seed(cfg.seed, ugv.cfg.id, 0x41), ugv.frame);
        result.latency_rows.push_back({ugv.cfg.id, ugv.frame, t, stages});

        const std::vector<Detection2D> detections = simulate_detector(
            true_pose, pod, pod_extr, world, cfg.sensing, ugv.rng_detect, t);
        std::vector<PointCloudCam> clouds;
        for (int m = 0; m < static_cast<int>(pod.modules.size()); ++m) {
          clouds.push_back(simulate_stereo_cloud(true_pose, pod, m, pod_extr[m],
                                                 world, cfg.sensing,
                                                 ugv.rng_stereo));
        }

        Pose measured = ugv.measured_pose;
        measured.timestamp = t;
        std::vector<Contact> contacts;
        for (const Detection2D& det : detections) {
          contacts.push_back(make_contact(
              det, clouds[det.module_index], pod.modules[det.module_index].intrinsics,
              pod_extr[det.module_index], measured, cfg.depth_policy,
              cfg.cov_params, static_cast<int>(ugv.cfg.id)));
        }
        ugv.pending.push_back({t + stages.end_to_end, std::move(contacts)});
        ugv.frame += 1;
      }

      for (UavRuntime& uav : uavs) {
        Pose true_pose;
        true_pose.position_utm =
            Vec3(uav.position.x(), uav.position.y(), uav.cfg.altitude);
        true_pose.yaw = uav.heading;
        true_pose.timestamp = t;
        const StageTimes stages = pipeline_latency(
            cfg.pipeline, mix_seed(cfg.seed, uav.cfg.id, 0x41), uav.frame);
        result.latency_rows.push_back({uav.cfg.id, uav.frame, t, stages});
        uav.frame += 1;

        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (const WorldObject& obj : world.objects) {
          // The UAV geolocates the ground-contact point under the box.
          const Vec3 base = obj.position_utm;
          const Vec3 cam_pt = uav_extr.rotation.transpose() *
                              (true_pose.rotation().transpose() *
                                   (base - true_pose.position_utm) -
                               uav_extr.translation);
          if (cam_pt.z() <= 1.0) continue;
          const PixelPoint px = project(cam_pt, uav_cam);
          if (!px.in_frame) continue;
          const double range = cam_pt.norm();
          if (range > cfg.sensing.max_detect_range) continue;
          if (unit(uav.rng_detect) >= cfg.sensing.p_detect_at(range)) continue;

          Vec2 center = px.px;
          if (cfg.sensing.bbox_noise_px > 0.0) {
            center.x() += cfg.sensing.bbox_noise_px * gauss(uav.rng_detect);
            center.y() += cfg.sensing.bbox_noise_px * gauss(uav.rng_detect);
          }

          const Pose& mp = uav.measured_pose;
          const Vec3 dir_world = mp.rotation() * uav_extr.rotation *
                                 backproject(center, 1.0, uav_cam).normalized();
          const Vec3 origin =
              mp.position_utm + mp.rotation() * uav_extr.translation;
          const auto hit = ray_terrain_intersection(world, origin, dir_world,
                                                    2.0 * cfg.sensing.max_detect_range);
          if (!hit.has_value()) continue;

          const double hit_range = std::max(1.0, (*hit - mp.position_utm).norm());
          const Mat3 cov = bearing_covariance(
              hit_range, (*hit - mp.position_utm).normalized(), cfg.cov_params);

          std::uint32_t report_id = 0;
          for (auto& [pos, id] : uav.known) {
            if ((pos - *hit).norm() <= cfg.merge_radius) {
              report_id = id;
              pos = *hit;
              break;
            }
          }
          if (report_id == 0) {
            report_id = uav.next_id++;
            uav.known.emplace_back(*hit, report_id);
          }

          TrackReport report;
          report.robot_id = uav.cfg.id;
          report.track_id = report_id;
          report.class_label = obj.class_label;
          report.position_utm = *hit;
          report.covariance_diag = cov.diagonal();
          report.confidence = 0.9f;
          report.timestamp = t;
          report.payload_bytes = cfg.payload_bytes;
          uav.pending.push_back({t + stages.end_to_end, report});
        }
      }
    }

    // Release fused contacts into the trackers once their pipeline delay has
    // elapsed; release UAV reports to the network the same way.
    for (UgvRuntime& ugv : ugvs) {
      std::vector<Contact> due;
      auto it = ugv.pending.begin();
      while (it != ugv.pending.end()) {
        if (it->release_time <= t) {
          due.insert(due.end(), it->contacts.begin(), it->contacts.end());
          it = ugv.pending.erase(it);
        } else {
          ++it;
        }
      }
      if (due.empty()) continue;

      const std::vector<TrackEvent> track_events = lifecycle_step(ugv.db, due, t);
      std::set<int> confirmed_now;
      for (const TrackEvent& e : track_events) {
        std::snprintf(line, sizeof(line), "%c %.3f robot=%u track=%d",
                      event_code(e.type), e.time, ugv.cfg.id, e.track_id);
        result.track_event_log.emplace_back(line);
        if (e.type == TrackEventType::confirm) confirmed_now.insert(e.track_id);
      }

      for (const auto& [id, track] : ugv.db.tracks) {
        if (track.status != TrackStatus::confirmed) continue;
        auto& last = ugv.last_reported_count[id];
        if (track.update_count == last) continue;
        const bool report_now = confirmed_now.count(id) > 0 ||
                                track.update_count % cfg.report_every_k == 0;
        last = track.update_count;
        if (!report_now) continue;

        TrackReport report;
        report.robot_id = ugv.cfg.id;
        report.track_id = static_cast<std::uint32_t>(id);
        report.class_label = track.class_label;
        report.position_utm = track.mean_utm;
        report.covariance_diag = track.covariance.diagonal();
        report.confidence = 0.9f;
        report.timestamp = track.last_update;
        report.payload_bytes = cfg.payload_bytes;
        send_report(report, t);
      }
    }
    for (UavRuntime& uav : uavs) {
      auto it = uav.pending.begin();
      while (it != uav.pending.end()) {
        if (it->release_time <= t) {
          send_report(it->report, t);
          it = uav.pending.erase(it);
        } else {
          ++it;
        }
      }
    }
  }

  // Aggregate the picture from the delivered reports, in delivery order.
  std::vector<DeliveryEvent> deliveries;
  for (const DeliveryEvent& e : events) {
    if (!e.dropped) deliveries.push_back(e);
  }
  std::stable_sort(deliveries.begin(), deliveries.end(),
                   [](const DeliveryEvent& a, const DeliveryEvent& b) {
                     return a.t_deliver < b.t_deliver;
                   });
  for (const DeliveryEvent& e : deliveries) {
    cop_ingest(result.cop, e.report, e.t_deliver, cfg.merge_radius);
  }
  result.delivery_log = events;
  std::stable_sort(result.delivery_log.begin(), result.delivery_log.end(),
                   [](const DeliveryEvent& a, const DeliveryEvent& b) {
                     const double ta = a.dropped ? a.t_send : a.t_deliver;
                     const double tb = b.dropped ? b.t_send : b.t_deliver;
                     return ta < tb;
                   });

  for (const UgvRuntime& ugv : ugvs) {
    result.final_positions.emplace_back(ugv.cfg.id, ugv.vehicle.position);
  }
  for (const UavRuntime& uav : uavs) {
    result.final_positions.emplace_back(uav.cfg.id, uav.position);
  }

  // Score the final confirmed tracks against ground truth.
  std::vector<std::pair<ObjectClass, Vec3>> estimates;
  for (const UgvRuntime& ugv : ugvs) {
    for (const auto& [id, track] : ugv.db.tracks) {
      if (track.status == TrackStatus::confirmed) {
        result.final_tracks.emplace_back(ugv.cfg.id, track);
        estimates.emplace_back(track.class_label, track.mean_utm);
      }
    }
  }
  const TrackScore score = score_tracks(estimates, world, cfg.match_radius);

  RunMetrics& metrics = result.metrics;
  metrics.precision = score.precision;
  metrics.recall = score.recall;
  metrics.vacuous = score.vacuous;
  metrics.geoloc_error_mean = score.error_mean;
  metrics.geoloc_error_max = score.error_max;
  metrics.confirmed_tracks = static_cast<int>(estimates.size());
  metrics.cop_objects = static_cast<int>(result.cop.objects.size());
  metrics.ground_truth_objects = static_cast<int>(world.objects.size());
  metrics.throughput_pixels_per_s = result.computed_throughput;

  double lat_sum = 0.0;
  for (const LatencyRow& row : result.latency_rows) {
    lat_sum += row.stages.end_to_end;
    metrics.latency_max = std::max(metrics.latency_max, row.stages.end_to_end);
  }
  metrics.latency_mean =
      result.latency_rows.empty() ? 0.0 : lat_sum / result.latency_rows.size();

  // COP consistency: every ground-truth object represented by exactly one COP
  // object of its class within the match radius.
  int consistent = 0;
  for (const WorldObject& obj : world.objects) {
    int hits = 0;
    for (const CopObject& cop : result.cop.objects) {
      if (cop.class_label != obj.class_label) continue;
      const double d = std::hypot(cop.position_utm.x() - obj.position_utm.x(),
                                  cop.position_utm.y() - obj.position_utm.y());
      if (d <= cfg.match_radius) hits += 1;
    }
    if (hits == 1) consistent += 1;
  }
  metrics.cop_consistency =
      world.objects.empty()
          ? 1.0
          : static_cast<double>(consistent) / world.objects.size();
  return result;
}

}  // namespace geosim
