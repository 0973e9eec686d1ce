#include "geosim/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "geosim/errors.hpp"

namespace geosim {

namespace {

using nlohmann::json;

class Reader {
 public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  void fail(const std::string& message) { errors_.push_back(message); }

  double num(const json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) {
      fail(key + ": expected a number");
      return fallback;
    }
    return j.at(key).get<double>();
  }

  long long integer(const json& j, const std::string& key, long long fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_integer()) {
      fail(key + ": expected an integer");
      return fallback;
    }
    return j.at(key).get<long long>();
  }

  std::string str(const json& j, const std::string& key,
                  const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_string()) {
      fail(key + ": expected a string");
      return fallback;
    }
    return j.at(key).get<std::string>();
  }

  Vec2 vec2(const json& j, const std::string& key, const Vec2& fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      fail(key + ": expected [x, y]");
      return fallback;
    }
    return Vec2(v[0].get<double>(), v[1].get<double>());
  }

 private:
  std::vector<std::string>& errors_;
};

PipelineStage stage(Reader& r, const json& j, const std::string& key,
                    const PipelineStage& fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    r.fail("pipeline." + key + ": expected [mean_s, jitter_s]");
    return fallback;
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

ScenarioConfig from_json(const json& root, std::vector<std::string>& errors) {
  Reader r(errors);
  ScenarioConfig cfg;

  cfg.seed = static_cast<std::uint64_t>(r.integer(root, "seed", 1));
  cfg.duration = r.num(root, "duration_s", cfg.duration);

  if (root.contains("world")) {
    const json& w = root.at("world");
    cfg.world.size = r.vec2(w, "size_m", cfg.world.size);
    cfg.world.heightfield_cell = r.num(w, "heightfield_cell_m", 1.0);
    cfg.world.base_amplitude = r.num(w, "base_amplitude_m", 0.0);
    cfg.world.base_wavelength = r.num(w, "base_wavelength_m", 60.0);
    cfg.world.random_objects = static_cast<int>(r.integer(w, "random_objects", 0));
    cfg.world.min_spacing = r.num(w, "min_spacing_m", 20.0);
    if (w.contains("rough_patches")) {
      if (!w.at("rough_patches").is_array()) {
        r.fail("world.rough_patches: expected an array");
      } else {
        for (const json& p : w.at("rough_patches")) {
          RoughPatch patch;
          patch.center = r.vec2(p, "center", patch.center);
          patch.radius = r.num(p, "radius_m", patch.radius);
          patch.amplitude = r.num(p, "amplitude_m", patch.amplitude);
          patch.wavelength = r.num(p, "wavelength_m", patch.wavelength);
          cfg.world.rough_patches.push_back(patch);
        }
      }
    }
    if (w.contains("objects")) {
      if (!w.at("objects").is_array()) {
        r.fail("world.objects: expected an array");
      } else {
        for (const json& o : w.at("objects")) {
          WorldSpec::FixedObject fixed;
          const std::string cls = r.str(o, "class", "person");
          try {
            fixed.class_label = object_class_from_string(cls);
          } catch (const ConfigError&) {
            r.fail("world.objects: unknown class '" + cls + "'");
          }
          fixed.position = r.vec2(o, "position", Vec2(0, 0));
          cfg.world.fixed_objects.push_back(fixed);
        }
      }
    }
  }

  if (root.contains("pod")) {
    const json& p = root.at("pod");
    cfg.pod_modules = static_cast<int>(r.integer(p, "modules", cfg.pod_modules));
    cfg.pod_hfov = deg2rad(r.num(p, "hfov_deg", rad2deg(cfg.pod_hfov)));
    cfg.pod_vfov = deg2rad(r.num(p, "vfov_deg", rad2deg(cfg.pod_vfov)));
    cfg.pod_overlap = deg2rad(r.num(p, "overlap_deg", rad2deg(cfg.pod_overlap)));
    cfg.cam_width = static_cast<int>(r.integer(p, "width_px", cfg.cam_width));
    cfg.cam_height = static_cast<int>(r.integer(p, "height_px", cfg.cam_height));
    cfg.pod_mount_height = r.num(p, "mount_height_m", cfg.pod_mount_height);
    if (p.contains("sensors_per_module")) {
      cfg.sensors_per_module.clear();
      if (!p.at("sensors_per_module").is_array()) {
        r.fail("pod.sensors_per_module: expected an array");
      } else {
        for (const json& s : p.at("sensors_per_module")) {
          SensorBand band;
          band.width_px = static_cast<int>(r.integer(s, "width_px", 0));
          band.height_px = static_cast<int>(r.integer(s, "height_px", 0));
          band.count = static_cast<int>(r.integer(s, "count", 1));
          cfg.sensors_per_module.push_back(band);
        }
      }
    }
  }

  if (root.contains("uav_camera")) {
    const json& u = root.at("uav_camera");
    cfg.uav_cam_width = static_cast<int>(r.integer(u, "width_px", cfg.uav_cam_width));
    cfg.uav_cam_height =
        static_cast<int>(r.integer(u, "height_px", cfg.uav_cam_height));
    cfg.uav_hfov = deg2rad(r.num(u, "hfov_deg", rad2deg(cfg.uav_hfov)));
    cfg.uav_vfov = deg2rad(r.num(u, "vfov_deg", rad2deg(cfg.uav_vfov)));
  }

  if (root.contains("sensing")) {
    const json& s = root.at("sensing");
    if (s.contains("p_detect")) {
      cfg.sensing.p_detect.clear();
      if (!s.at("p_detect").is_array()) {
        r.fail("sensing.p_detect: expected an array of [range, prob] pairs");
      } else {
        for (const json& knot : s.at("p_detect")) {
          if (!knot.is_array() || knot.size() != 2) {
            r.fail("sensing.p_detect: expected [range, prob] pairs");
            continue;
          }
          cfg.sensing.p_detect.emplace_back(knot[0].get<double>(),
                                            knot[1].get<double>());
        }
      }
    }
    cfg.sensing.clutter_rate = r.num(s, "clutter_rate", 0.0);
    cfg.sensing.bbox_noise_px = r.num(s, "bbox_noise_px", 0.0);
    cfg.sensing.stereo_baseline = r.num(s, "stereo_baseline_m", 0.2);
    cfg.sensing.disparity_noise_px = r.num(s, "disparity_noise_px", 0.5);
    cfg.sensing.pose_sigma_pos = r.num(s, "pose_sigma_m", 0.02);
    cfg.sensing.pose_sigma_heading =
        deg2rad(r.num(s, "pose_sigma_heading_deg", 0.2));
    cfg.sensing.capture_rate = r.num(s, "capture_rate_hz", 4.0);
    cfg.sensing.max_detect_range = r.num(s, "max_detect_range_m", 250.0);
  }

  if (root.contains("fusion")) {
    const json& f = root.at("fusion");
    cfg.depth_policy.min_points =
        static_cast<int>(r.integer(f, "min_points", cfg.depth_policy.min_points));
    cfg.depth_policy.max_reliable_range =
        r.num(f, "max_reliable_range_m", cfg.depth_policy.max_reliable_range);
    cfg.depth_policy.default_depth =
        r.num(f, "default_depth_m", cfg.depth_policy.default_depth);
    cfg.cov_params.k_range = r.num(f, "k_range", cfg.cov_params.k_range);
    cfg.cov_params.k_bearing = r.num(f, "k_bearing", cfg.cov_params.k_bearing);
  }

  if (root.contains("tracker")) {
    const json& t = root.at("tracker");
    cfg.tracker.n_confirm =
        static_cast<int>(r.integer(t, "n_confirm", cfg.tracker.n_confirm));
    cfg.tracker.max_gap = r.num(t, "max_gap_s", cfg.tracker.max_gap);
    cfg.tracker.death_timeout =
        r.num(t, "death_timeout_s", cfg.tracker.death_timeout);
    cfg.tracker.gate_threshold = r.num(t, "gate", cfg.tracker.gate_threshold);
    cfg.report_every_k =
        static_cast<int>(r.integer(t, "report_every_k", cfg.report_every_k));
  }

  if (root.contains("terrain")) {
    const json& t = root.at("terrain");
    cfg.roughness.radius = r.num(t, "roughness_radius_m", cfg.roughness.radius);
    cfg.roughness.threshold =
        r.num(t, "roughness_threshold_m", cfg.roughness.threshold);
    cfg.roughness.min_points =
        static_cast<int>(r.integer(t, "min_points", cfg.roughness.min_points));
    cfg.costmap_cell = r.num(t, "cell_size_m", cfg.costmap_cell);
    cfg.local_grid_cells =
        static_cast<int>(r.integer(t, "local_grid_cells", cfg.local_grid_cells));
    cfg.local_grid_cell_size =
        r.num(t, "local_cell_size_m", cfg.local_grid_cell_size);
    cfg.lidar_range = r.num(t, "lidar_range_m", cfg.lidar_range);
    cfg.voxel_size = r.num(t, "voxel_size_m", cfg.voxel_size);
    cfg.occupancy_threshold =
        r.num(t, "occupancy_threshold", cfg.occupancy_threshold);
  }

  if (root.contains("planner")) {
    const json& p = root.at("planner");
    cfg.headings = static_cast<int>(r.integer(p, "headings", cfg.headings));
    cfg.min_turn_radius = r.num(p, "min_turn_radius_m", cfg.min_turn_radius);
    cfg.arc_length = r.num(p, "arc_length_m", cfg.arc_length);
    cfg.eps.initial_eps = r.num(p, "eps_initial", cfg.eps.initial_eps);
    cfg.eps.decrement = r.num(p, "eps_decrement", cfg.eps.decrement);
    cfg.eps.final_eps = r.num(p, "eps_final", cfg.eps.final_eps);
    cfg.eps.max_expansions =
        r.integer(p, "max_expansions", cfg.eps.max_expansions);
    cfg.eps.time_budget_s = r.num(p, "time_budget_s", cfg.eps.time_budget_s);
    cfg.goal_tolerance = r.num(p, "goal_tolerance_m", cfg.goal_tolerance);
  }

  if (root.contains("controller")) {
    const json& c = root.at("controller");
    cfg.lookahead = r.num(c, "lookahead_m", cfg.lookahead);
    cfg.cruise_speed = r.num(c, "speed_mps", cfg.cruise_speed);
  }

  if (root.contains("pipeline")) {
    const json& p = root.at("pipeline");
    cfg.pipeline.trigger_to_capture =
        stage(r, p, "trigger_to_capture", cfg.pipeline.trigger_to_capture);
    cfg.pipeline.capture_to_cpu =
        stage(r, p, "capture_to_cpu", cfg.pipeline.capture_to_cpu);
    cfg.pipeline.preprocess = stage(r, p, "preprocess", cfg.pipeline.preprocess);
    cfg.pipeline.stereo_pointcloud =
        stage(r, p, "stereo_pointcloud", cfg.pipeline.stereo_pointcloud);
    cfg.pipeline.transfer = stage(r, p, "transfer", cfg.pipeline.transfer);
    cfg.pipeline.detection = stage(r, p, "detection", cfg.pipeline.detection);
    cfg.pipeline.localization_3d =
        stage(r, p, "localization_3d", cfg.pipeline.localization_3d);
  }

  if (root.contains("network")) {
    const json& n = root.at("network");
    cfg.link.latency_base = r.num(n, "latency_base_s", cfg.link.latency_base);
    cfg.link.latency_jitter = r.num(n, "latency_jitter_s", cfg.link.latency_jitter);
    cfg.link.loss_prob = r.num(n, "loss_prob", cfg.link.loss_prob);
    cfg.link.bandwidth = r.num(n, "bandwidth_Bps", cfg.link.bandwidth);
    cfg.payload_bytes = static_cast<std::uint32_t>(
        r.integer(n, "payload_bytes", cfg.payload_bytes));
    cfg.merge_radius = r.num(n, "merge_radius_m", cfg.merge_radius);
  }

  if (root.contains("scoring")) {
    cfg.match_radius =
        r.num(root.at("scoring"), "match_radius_m", cfg.match_radius);
    cfg.nominal_pixels_per_s = r.num(root.at("scoring"), "nominal_pixels_per_s",
                                     cfg.nominal_pixels_per_s);
  }

  if (root.contains("robots")) {
    if (!root.at("robots").is_array()) {
      r.fail("robots: expected an array");
    } else {
      for (const json& rj : root.at("robots")) {
        RobotConfig robot;
        robot.id = static_cast<std::uint32_t>(r.integer(rj, "id", 0));
        const std::string kind = r.str(rj, "kind", "ugv");
        if (kind == "ugv") {
          robot.kind = RobotKind::ugv;
        } else if (kind == "uav") {
          robot.kind = RobotKind::uav;
        } else {
          r.fail("robots: unknown kind '" + kind + "'");
        }
        robot.start = r.vec2(rj, "start", robot.start);
        robot.start_heading = deg2rad(r.num(rj, "heading_deg", 0.0));
        robot.altitude = r.num(rj, "altitude_m", robot.altitude);
        robot.speed = r.num(rj, "speed_mps", robot.speed);
        if (rj.contains("waypoints")) {
          if (!rj.at("waypoints").is_array()) {
            r.fail("robots.waypoints: expected an array of [x, y]");
          } else {
            for (const json& wp : rj.at("waypoints")) {
              if (!wp.is_array() || wp.size() != 2) {
                r.fail("robots.waypoints: expected [x, y] entries");
                continue;
              }
              robot.waypoints.emplace_back(wp[0].get<double>(),
                                           wp[1].get<double>());
            }
          }
        }
        cfg.robots.push_back(robot);
      }
    }
  }

  return cfg;
}

}  // namespace

std::vector<std::string> validate_scenario_config(const ScenarioConfig& cfg) {
  std::vector<std::string> errors;
  auto require = [&](bool ok, const std::string& message) {
    if (!ok) errors.push_back(message);
  };

  require(cfg.duration > 0.0, "duration_s must be positive");
  require(cfg.world.size.x() > 0.0 && cfg.world.size.y() > 0.0,
          "world.size_m must be positive");
  require(cfg.world.heightfield_cell > 0.0,
          "world.heightfield_cell_m must be positive");
  require(cfg.world.random_objects >= 0, "world.random_objects must be >= 0");

  require(cfg.pod_modules >= 1, "pod.modules must be >= 1");
  require(cfg.pod_hfov > 0.0 && cfg.pod_hfov < kPi,
          "pod.hfov_deg must be in (0, 180)");
  require(cfg.pod_overlap >= 0.0 && cfg.pod_overlap < cfg.pod_hfov,
          "pod.overlap_deg must satisfy 0 <= overlap < hfov");
  require(cfg.pod_modules * cfg.pod_hfov -
                  (cfg.pod_modules - 1) * cfg.pod_overlap <=
              2.0 * kPi + 1e-12,
          "pod covers more than a full circle");
  require(cfg.cam_width > 0 && cfg.cam_height > 0,
          "pod.width_px/height_px must be positive");

  for (const auto& [range, prob] : cfg.sensing.p_detect) {
    require(prob >= 0.0 && prob <= 1.0,
            "sensing.p_detect probabilities must lie in [0, 1]");
    require(range >= 0.0, "sensing.p_detect ranges must be >= 0");
  }
  require(cfg.sensing.stereo_baseline > 0.0,
          "sensing.stereo_baseline_m must be positive");
  require(cfg.sensing.capture_rate > 0.0,
          "sensing.capture_rate_hz must be positive");
  require(cfg.sensing.clutter_rate >= 0.0, "sensing.clutter_rate must be >= 0");

  require(cfg.depth_policy.min_points >= 1, "fusion.min_points must be >= 1");
  require(cfg.depth_policy.default_depth > 0.0 &&
              cfg.depth_policy.default_depth <=
                  cfg.depth_policy.max_reliable_range,
          "fusion.default_depth_m must be in (0, max_reliable_range_m]");
  require(cfg.cov_params.k_range > cfg.cov_params.k_bearing &&
              cfg.cov_params.k_bearing > 0.0,
          "fusion requires k_range > k_bearing > 0");

  require(cfg.tracker.n_confirm >= 1, "tracker.n_confirm must be >= 1");
  require(cfg.tracker.max_gap > 0.0, "tracker.max_gap_s must be positive");
  require(cfg.tracker.death_timeout > cfg.tracker.max_gap,
          "tracker.death_timeout_s must exceed max_gap_s");
  require(cfg.tracker.gate_threshold > 0.0, "tracker.gate must be positive");
  require(cfg.report_every_k >= 1, "tracker.report_every_k must be >= 1");

  require(cfg.roughness.radius > 0.0, "terrain.roughness_radius_m must be positive");
  require(cfg.roughness.threshold > 0.0,
          "terrain.roughness_threshold_m must be positive");
  require(cfg.roughness.min_points >= 3, "terrain.min_points must be >= 3");
  require(cfg.costmap_cell > 0.0, "terrain.cell_size_m must be positive");
  require(cfg.local_grid_cells > 0, "terrain.local_grid_cells must be positive");
  require(cfg.occupancy_threshold >= 0.0 && cfg.occupancy_threshold <= 1.0,
          "terrain.occupancy_threshold must lie in [0, 1]");

  require(cfg.headings >= 4, "planner.headings must be >= 4");
  require(cfg.min_turn_radius > 0.0, "planner.min_turn_radius_m must be positive");
  require(cfg.arc_length >= cfg.min_turn_radius * 2.0 * kPi / cfg.headings,
          "planner.arc_length_m too short to change one heading bin");
  require(cfg.eps.initial_eps >= cfg.eps.final_eps && cfg.eps.final_eps >= 1.0,
          "planner epsilon schedule must satisfy initial >= final >= 1");
  require(cfg.eps.decrement > 0.0, "planner.eps_decrement must be positive");
  require(cfg.goal_tolerance >= cfg.costmap_cell,
          "planner.goal_tolerance_m must be at least one costmap cell");

  require(cfg.lookahead > 0.0, "controller.lookahead_m must be positive");
  require(cfg.cruise_speed > 0.0, "controller.speed_mps must be positive");

  require(cfg.link.latency_base >= 0.0, "network.latency_base_s must be >= 0");
  require(cfg.link.loss_prob >= 0.0 && cfg.link.loss_prob <= 1.0,
          "network.loss_prob must lie in [0, 1]");
  require(cfg.link.bandwidth > 0.0, "network.bandwidth_Bps must be positive");
  require(cfg.payload_bytes > 0, "network.payload_bytes must be positive");
  require(cfg.merge_radius > 0.0, "network.merge_radius_m must be positive");
  require(cfg.match_radius > 0.0, "scoring.match_radius_m must be positive");

  std::vector<std::uint32_t> ids;
  for (const RobotConfig& robot : cfg.robots) {
    require(robot.id > 0, "robots.id must be positive");
    for (std::uint32_t other : ids) {
      require(other != robot.id,
              "robots.id " + std::to_string(robot.id) + " is duplicated");
    }
    ids.push_back(robot.id);
    require(!robot.waypoints.empty(),
            "robot " + std::to_string(robot.id) + " has no waypoints");
    for (const Vec2& wp : robot.waypoints) {
      require(wp.x() >= 0.0 && wp.x() <= cfg.world.size.x() && wp.y() >= 0.0 &&
                  wp.y() <= cfg.world.size.y(),
              "robot " + std::to_string(robot.id) + " waypoint outside the world");
    }
    if (robot.kind == RobotKind::uav) {
      require(robot.altitude > 0.0, "uav altitude_m must be positive");
      require(robot.speed > 0.0, "uav speed_mps must be positive");
    }
  }

  for (const WorldSpec::FixedObject& obj : cfg.world.fixed_objects) {
    require(obj.position.x() >= 0.0 && obj.position.x() <= cfg.world.size.x() &&
                obj.position.y() >= 0.0 && obj.position.y() <= cfg.world.size.y(),
            "world object outside the world bounds");
  }
  return errors;
}

ScenarioConfig parse_scenario_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  std::vector<std::string> errors;
  ScenarioConfig cfg = from_json(root, errors);
  const std::vector<std::string> more = validate_scenario_config(cfg);
  errors.insert(errors.end(), more.begin(), more.end());
  if (!errors.empty()) throw ConfigError(errors);
  return cfg;
}

ScenarioConfig load_scenario_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario_config(buffer.str());
}

}  // namespace geosim
