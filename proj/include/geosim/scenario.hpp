#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "geosim/fusion.hpp"
#include "geosim/geometry.hpp"
#include "geosim/meshnet.hpp"
#include "geosim/navigation.hpp"
#include "geosim/terrain.hpp"
#include "geosim/tracker.hpp"

namespace geosim {

struct RoughPatch {
  Vec2 center{0.0, 0.0};
  double radius = 10.0;
  double amplitude = 0.5;
  double wavelength = 3.0;
};

struct WorldObject {
  ObjectClass class_label = ObjectClass::person;
  Vec3 position_utm{0.0, 0.0, 0.0};
  double footprint_radius = 0.3;
  double height = 1.8;
};

struct WorldSpec {
  Vec2 size{200.0, 200.0};
  double heightfield_cell = 1.0;
  double base_amplitude = 0.0;  // 0 keeps the field perfectly flat
  double base_wavelength = 60.0;
  std::vector<RoughPatch> rough_patches;
  struct FixedObject {
    ObjectClass class_label;
    Vec2 position;
  };
  std::vector<FixedObject> fixed_objects;
  int random_objects = 0;
  double min_spacing = 20.0;
};

/// Synthetic site: a materialized heightfield plus the ground-truth objects.
struct World {
  WorldSpec spec;
  std::uint64_t seed = 0;
  int nx = 0, ny = 0;
  std::vector<double> heights;  // row-major, ny rows of nx
  std::vector<WorldObject> objects;

  double grid_height(int ix, int iy) const { return heights[iy * nx + ix]; }
  /// Bilinear height; clamped at the field border.
  double height_at(double x, double y) const;
  /// One point per heightfield node.
  PointCloudWorld terrain_cloud() const;
};

World gen_world(std::uint64_t seed, const WorldSpec& spec);

/// True where terrain rises above the straight segment between two points.
bool terrain_occludes(const World& world, const Vec3& from, const Vec3& to);

/// First terrain hit along a ray, or empty within max_range.
std::optional<Vec3> ray_terrain_intersection(const World& world,
                                             const Vec3& origin, const Vec3& dir,
                                             double max_range);

struct SensingModel {
  // Piecewise-linear detection probability over range, as (range, prob) knots.
  std::vector<std::pair<double, double>> p_detect{{0.0, 1.0}, {80.0, 1.0},
                                                  {250.0, 0.0}};
  double clutter_rate = 0.0;  // false positives per module per frame
  double bbox_noise_px = 0.0;
  double stereo_baseline = 0.2;
  double disparity_noise_px = 0.5;
  double pose_sigma_pos = 0.02;
  double pose_sigma_heading = deg2rad(0.2);
  double capture_rate = 4.0;
  double max_detect_range = 250.0;

  double p_detect_at(double range) const;
};

/// Triangulation depth noise: sigma_z = z^2 * sigma_d / (focal * baseline).
double stereo_depth_sigma(double depth, double focal_px, double baseline_m,
                          double disparity_noise_px);

/// Parametric stand-in for the detector: per visible, unoccluded object one
/// detection in the best-aligned module with probability p_detect(range),
/// plus Poisson clutter per module.
std::vector<Detection2D> simulate_detector(const Pose& pose, const PodConfig& pod,
                                           const std::vector<Extrinsics>& extrinsics,
                                           const World& world,
                                           const SensingModel& model,
                                           std::mt19937_64& rng, double t);

/// Stereo cloud for one module: a coarse terrain fan plus dense points on
/// each visible object's center plane, depths perturbed per the z^2 law.
PointCloudCam simulate_stereo_cloud(const Pose& pose, const PodConfig& pod,
                                    int module_index, const Extrinsics& extr,
                                    const World& world, const SensingModel& model,
                                    std::mt19937_64& rng);

/// RTK-grade pose noise; roll and pitch stay exact.
Pose simulate_pose(const Pose& true_pose, const SensingModel& model,
                   std::mt19937_64& rng);

struct PipelineStage {
  double mean = 0.0;
  double jitter = 0.0;  // uniform half-width
};

struct PipelineModel {
  PipelineStage trigger_to_capture{0.005, 0.0};
  PipelineStage capture_to_cpu{0.060, 0.0};
  PipelineStage preprocess{0.050, 0.0};
  PipelineStage stereo_pointcloud{0.120, 0.0};
  PipelineStage transfer{0.030, 0.0};
  PipelineStage detection{0.080, 0.0};
  PipelineStage localization_3d{0.010, 0.0};
};

struct StageTimes {
  double trigger_to_capture = 0.0;
  double capture_to_cpu = 0.0;
  double preprocess = 0.0;
  double stereo_pointcloud = 0.0;
  double transfer = 0.0;
  double detection = 0.0;
  double localization_3d = 0.0;
  double end_to_end = 0.0;
};

/// Per-frame stage draw. The detection branch (preprocess + detection) and
/// the stereo branch (pointcloud + transfer) run in parallel; the rest is
/// serial.
StageTimes pipeline_latency(const PipelineModel& model, std::uint64_t seed,
                            long long frame_index);

/// Aggregate pixel rate of every imager on the pod at the capture rate.
double throughput_pixels_per_s(const PodConfig& pod, double capture_rate);

enum class RobotKind : std::uint8_t { ugv, uav };

struct RobotConfig {
  std::uint32_t id = 1;
  RobotKind kind = RobotKind::ugv;
  Vec2 start{0.0, 0.0};
  double start_heading = 0.0;
  std::vector<Vec2> waypoints;
  double altitude = 60.0;  // uav only
  double speed = 8.0;      // uav cruise speed
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  double duration = 60.0;
  WorldSpec world;

  int pod_modules = 5;
  double pod_hfov = deg2rad(48.0);
  double pod_vfov = deg2rad(36.0);
  double pod_overlap = deg2rad(12.0);
  int cam_width = 4096;
  int cam_height = 3000;
  double pod_mount_height = 1.5;
  std::vector<SensorBand> sensors_per_module{{4096, 3000, 3}, {640, 480, 1}};

  int uav_cam_width = 2048;
  int uav_cam_height = 1536;
  double uav_hfov = deg2rad(60.0);
  double uav_vfov = deg2rad(45.0);

  SensingModel sensing;
  DepthPolicy depth_policy;
  CovarianceParams cov_params;
  LifecycleParams tracker;
  int report_every_k = 1;

  RoughnessParams roughness;
  double costmap_cell = 0.5;
  int local_grid_cells = 80;
  double local_grid_cell_size = 0.5;
  double lidar_range = 50.0;
  double voxel_size = 0.2;
  double occupancy_threshold = 0.3;

  int headings = 16;
  double min_turn_radius = 4.0;
  double arc_length = 2.0;
  EpsSchedule eps;
  double lookahead = 8.0;
  double cruise_speed = 3.0;
  double goal_tolerance = 2.0;

  PipelineModel pipeline;
  LinkModel link;
  std::uint32_t payload_bytes = 65536;
  double merge_radius = 5.0;
  double match_radius = 5.0;
  // Platform's nominal aggregate pixel rate, echoed next to the computed one.
  double nominal_pixels_per_s = 728e6;

  std::vector<RobotConfig> robots;
};

struct RunMetrics {
  double precision = 1.0;
  double recall = 1.0;
  bool vacuous = false;  // no tracks and no objects: 1.0 by convention
  double geoloc_error_mean = 0.0;
  double geoloc_error_max = 0.0;
  double latency_mean = 0.0;
  double latency_max = 0.0;
  double cop_consistency = 1.0;
  int confirmed_tracks = 0;
  int cop_objects = 0;
  int ground_truth_objects = 0;
  double throughput_pixels_per_s = 0.0;
};

/// Greedy nearest same-class matching of track positions to ground truth.
struct TrackScore {
  double precision = 1.0;
  double recall = 1.0;
  bool vacuous = false;
  double error_mean = 0.0;
  double error_max = 0.0;
  int matched = 0;
};
TrackScore score_tracks(const std::vector<std::pair<ObjectClass, Vec3>>& estimates,
                        const World& world, double match_radius);

struct LatencyRow {
  std::uint32_t robot_id;
  long long frame;
  double t_capture;
  StageTimes stages;
};

struct RunResult {
  RunMetrics metrics;
  CopState cop;
  std::vector<DeliveryEvent> delivery_log;
  std::vector<LatencyRow> latency_rows;
  std::vector<std::pair<std::uint32_t, Track>> final_tracks;  // confirmed only
  std::vector<std::string> track_event_log;
  std::vector<std::pair<std::uint32_t, Vec2>> final_positions;
  double computed_throughput = 0.0;
};

/// Full closed loop: drive, sense, fuse, track, report, aggregate, score.
RunResult run_scenario(const ScenarioConfig& config);

/// GeoJSON FeatureCollection of the final confirmed tracks.
std::string tracks_to_geojson(
    const std::vector<std::pair<std::uint32_t, Track>>& tracks);

}  // namespace geosim
