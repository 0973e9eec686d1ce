#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "geosim/config.hpp"
#include "geosim/errors.hpp"
#include "geosim/meshnet.hpp"
#include "geosim/navigation.hpp"
#include "geosim/scenario.hpp"
#include "geosim/terrain.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

namespace fs = std::filesystem;
using geosim::ConfigError;

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string format_metrics_csv(const geosim::RunMetrics& m, double nominal) {
  char buf[3200];
  std::snprintf(
      buf, sizeof(buf),
      "metric,value\n"
      "precision,%.9g\n"
      "recall,%.9g\n"
      "vacuous_score,%d\n"
      "geolocation_error_mean_m,%.9g\n"
      "geolocation_error_max_m,%.9g\n"
      "latency_mean_s,%.9g\n"
      "latency_max_s,%.9g\n"
      "cop_consistency,%.9g\n"
      "confirmed_tracks,%d\n"
      "cop_objects,%d\n"
      "ground_truth_objects,%d\n"
      "throughput_pixels_per_s,%.9g\n"
      "nominal_pixels_per_s,%.9g\n",
      m.precision, m.recall, m.vacuous ? 1 : 0, m.geoloc_error_mean,
      m.geoloc_error_max, m.latency_mean, m.latency_max, m.cop_consistency,
      m.confirmed_tracks, m.cop_objects, m.ground_truth_objects,
      m.throughput_pixels_per_s, nominal);
  return buf;
}

std::string format_latency_csv(const std::vector<geosim::LatencyRow>& rows) {
  std::string out =
      "robot,frame,t_capture_s,trigger_to_capture_s,capture_to_cpu_s,"
      "preprocess_s,stereo_pointcloud_s,transfer_s,detection_s,"
      "localization_3d_s,end_to_end_s\n";
  char buf[320];
  for (const geosim::LatencyRow& row : rows) {
    std::snprintf(buf, sizeof(buf),
                  "%u,%lld,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  row.robot_id, row.frame, row.t_capture,
                  row.stages.trigger_to_capture, row.stages.capture_to_cpu,
                  row.stages.preprocess, row.stages.stereo_pointcloud,
                  row.stages.transfer, row.stages.detection,
                  row.stages.localization_3d, row.stages.end_to_end);
    out += buf;
  }
  return out;
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            long long seed_override, bool quiet) {
  geosim::ScenarioConfig cfg = geosim::load_scenario_config(config_path);
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);

  fs::create_directories(out_dir);
  const geosim::RunResult result = geosim::run_scenario(cfg);

  write_file(fs::path(out_dir) / "metrics.csv",
             format_metrics_csv(result.metrics, cfg.nominal_pixels_per_s));
  write_file(fs::path(out_dir) / "tracks.geojson",
             geosim::tracks_to_geojson(result.final_tracks));
  write_file(fs::path(out_dir) / "cop.geojson", geosim::cop_to_geojson(result.cop));
  write_file(fs::path(out_dir) / "latency.csv",
             format_latency_csv(result.latency_rows));

  {
    std::string log;
    char header[128];
    std::snprintf(header, sizeof(header), "# geosim deliveries v1 merge_radius=%.17g\n",
                  cfg.merge_radius);
    log += header;
    for (const geosim::DeliveryEvent& event : result.delivery_log) {
      log += geosim::delivery_log_line(event);
      log += "\n";
    }
    write_file(fs::path(out_dir) / "deliveries.log", log);
  }
  {
    std::string log;
    for (const std::string& line : result.track_event_log) {
      log += line;
      log += "\n";
    }
    write_file(fs::path(out_dir) / "track_events.log", log);
  }

  nlohmann::json meta;
  meta["seed"] = cfg.seed;
  meta["duration_s"] = cfg.duration;
  meta["robots"] = cfg.robots.size();
  meta["ground_truth_objects"] = result.metrics.ground_truth_objects;
  meta["throughput"]["computed_pixels_per_s"] = result.computed_throughput;
  meta["throughput"]["nominal_pixels_per_s"] = cfg.nominal_pixels_per_s;
  meta["throughput"]["ratio"] =
      result.computed_throughput / cfg.nominal_pixels_per_s;
  meta["throughput"]["note"] =
      "computed from the per-module imager inventory at the capture rate; the "
      "nominal figure counts the array differently (pan-tilt imagers excluded "
      "here)";
  write_file(fs::path(out_dir) / "run_meta.json", meta.dump(2) + "\n");

  if (!quiet) {
    std::printf("run complete: %d confirmed tracks, %d cop objects, "
                "precision %.3f, recall %.3f\n",
                result.metrics.confirmed_tracks, result.metrics.cop_objects,
                result.metrics.precision, result.metrics.recall);
    std::printf("outputs in %s\n", out_dir.c_str());
  }
  return kExitOk;
}

int cmd_costmap(const std::string& cloud_path, const std::string& out_dir,
                const geosim::RoughnessParams& params, double cell_size,
                bool quiet) {
  const geosim::PointCloudWorld cloud = geosim::load_xyz_text(cloud_path);
  const geosim::CostMapGlobal map =
      geosim::build_global_costmap(cloud, params, cell_size);

  fs::create_directories(out_dir);
  geosim::save_costmap(map, (fs::path(out_dir) / "costmap.bin").string());

  std::string csv = "ix,iy,x,y,roughness_m,has_data,navigable,cost\n";
  char buf[160];
  long long navigable = 0, rough = 0, unknown = 0;
  for (int iy = 0; iy < map.height; ++iy) {
    for (int ix = 0; ix < map.width; ++ix) {
      const geosim::CostCell& cell = map.at(ix, iy);
      const geosim::Vec2 center = map.cell_center(ix, iy);
      std::snprintf(buf, sizeof(buf), "%d,%d,%.3f,%.3f,%.6f,%d,%d,%.6f\n", ix, iy,
                    center.x(), center.y(), cell.roughness, cell.has_data ? 1 : 0,
                    cell.navigable ? 1 : 0, cell.navigable ? cell.cost : -1.0);
      csv += buf;
      if (!cell.has_data) {
        unknown += 1;
      } else if (cell.navigable) {
        navigable += 1;
      } else {
        rough += 1;
      }
    }
  }
  write_file(fs::path(out_dir) / "roughness.csv", csv);

  if (!quiet) {
    std::printf("costmap %dx%d cells (%.2f m): navigable=%lld rough=%lld "
                "unknown=%lld\n",
                map.width, map.height, map.cell_size, navigable, rough, unknown);
    std::printf("roughness radius %.2f m, threshold %.3f m, min points %d\n",
                params.radius, params.threshold, params.min_points);
  }
  return kExitOk;
}

bool parse_xy(const std::string& text, geosim::Vec2& out) {
  double x, y;
  if (std::sscanf(text.c_str(), "%lf,%lf", &x, &y) != 2) return false;
  out = geosim::Vec2(x, y);
  return true;
}

int cmd_plan(const std::string& costmap_path, const std::string& start_text,
             const std::vector<std::string>& waypoint_texts,
             const std::string& out_dir, const geosim::EpsSchedule& sched,
             double turn_radius, double arc_length, int headings,
             double goal_tolerance, bool quiet) {
  const geosim::CostMapGlobal map = geosim::load_costmap(costmap_path);

  double sx, sy, sheading_deg = 0.0;
  if (std::sscanf(start_text.c_str(), "%lf,%lf,%lf", &sx, &sy, &sheading_deg) < 2) {
    throw ConfigError("--start expects x,y[,heading_deg]");
  }
  std::vector<geosim::Vec2> waypoints;
  for (const std::string& text : waypoint_texts) {
    geosim::Vec2 wp;
    if (!parse_xy(text, wp)) throw ConfigError("--waypoint expects x,y");
    waypoints.push_back(wp);
  }

  const geosim::PrimitiveSet prims = geosim::generate_primitives(
      turn_radius, arc_length, headings, map.cell_size);
  geosim::VehicleState start;
  start.position = geosim::Vec2(sx, sy);
  start.heading = geosim::deg2rad(sheading_deg);

  const geosim::RouteResult route = geosim::plan_route_details(
      start, waypoints, map, prims, sched, goal_tolerance);

  fs::create_directories(out_dir);
  write_file(fs::path(out_dir) / "trajectory.geojson",
             geosim::trajectory_to_geojson(route.trajectory));

  long long expansions = 0;
  double achieved = 1.0;
  for (const geosim::PlanResult& leg : route.legs) {
    expansions += leg.expansions;
    achieved = std::max(achieved, leg.achieved_eps);
  }
  if (!quiet) {
    std::printf("planned %zu leg(s), length %.2f m, achieved_eps=%.3f, "
                "expansions=%lld\n",
                route.legs.size(), route.trajectory.total_length(), achieved,
                expansions);
  }
  return kExitOk;
}

int cmd_replay(const std::string& log_path, const std::string& out_dir,
               bool quiet) {
  std::ifstream in(log_path);
  if (!in) throw ConfigError("cannot open delivery log: " + log_path);

  std::string line;
  if (!std::getline(in, line)) throw ConfigError("delivery log is empty");
  double merge_radius = 0.0;
  if (std::sscanf(line.c_str(), "# geosim deliveries v1 merge_radius=%lf",
                  &merge_radius) != 1 ||
      merge_radius <= 0.0) {
    throw ConfigError("record 0: bad delivery log header");
  }

  geosim::CopState cop;
  double prev_time = -std::numeric_limits<double>::infinity();
  long long index = 0;
  long long delivered = 0;
  while (std::getline(in, line)) {
    index += 1;
    if (line.empty()) continue;
    geosim::DeliveryEvent event;
    try {
      event = geosim::parse_delivery_log_line(line);
    } catch (const ConfigError& e) {
      throw ConfigError("record " + std::to_string(index) + ": " + e.what());
    }
    const double event_time = event.dropped ? event.t_send : event.t_deliver;
    if (event_time < prev_time) {
      throw ConfigError("record " + std::to_string(index) +
                        ": timestamps must be non-decreasing");
    }
    prev_time = event_time;
    if (!event.dropped) {
      geosim::cop_ingest(cop, event.report, event.t_deliver, merge_radius);
      delivered += 1;
    }
  }

  fs::create_directories(out_dir);
  write_file(fs::path(out_dir) / "cop.geojson", geosim::cop_to_geojson(cop));
  if (!quiet) {
    std::printf("replayed %lld records (%lld delivered) into %zu cop objects\n",
                index, delivered, cop.objects.size());
  }
  return kExitOk;
}

int cmd_report(const std::string& metrics_path) {
  std::ifstream in(metrics_path);
  if (!in) throw ConfigError("cannot open metrics file: " + metrics_path);
  std::string line;
  if (!std::getline(in, line) || line != "metric,value") {
    throw ConfigError("not a geosim metrics file: " + metrics_path);
  }
  std::printf("%-32s %s\n", "metric", "value");
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    std::printf("%-32s %s\n", line.substr(0, comma).c_str(),
                line.substr(comma + 1).c_str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geosim: multi-robot object geolocation simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  long long seed_override = -1;
  bool quiet = false;

  auto* run = app.add_subcommand("run", "run a scenario end to end");
  run->add_option("--config", config_path, "scenario config (JSON)")->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--seed", seed_override, "override the config seed");
  run->add_flag("--quiet", quiet, "suppress status output");

  std::string cloud_path;
  geosim::RoughnessParams rparams;
  double costmap_cell = 0.5;
  auto* costmap = app.add_subcommand("costmap", "build a cost-map from x y z text");
  costmap->add_option("--cloud", cloud_path, "point cloud (x y z per line)")
      ->required();
  costmap->add_option("--out", out_dir, "output directory");
  costmap->add_option("--radius", rparams.radius, "plane-fit radius (m)");
  costmap->add_option("--threshold", rparams.threshold, "roughness threshold (m)");
  costmap->add_option("--min-points", rparams.min_points, "min points per fit");
  costmap->add_option("--cell", costmap_cell, "cell size (m)");
  costmap->add_flag("--quiet", quiet, "suppress status output");

  std::string costmap_path, start_text;
  std::vector<std::string> waypoint_texts;
  geosim::EpsSchedule sched;
  double turn_radius = 4.0, arc_length = 2.0, goal_tolerance = 1.0;
  int headings = 16;
  auto* plan = app.add_subcommand("plan", "plan a route over a saved cost-map");
  plan->add_option("--costmap", costmap_path, "costmap.bin path")->required();
  plan->add_option("--start", start_text, "start as x,y[,heading_deg]")->required();
  plan->add_option("--waypoint", waypoint_texts, "waypoint as x,y (repeatable)")
      ->required();
  plan->add_option("--out", out_dir, "output directory");
  plan->add_option("--eps-initial", sched.initial_eps, "initial epsilon");
  plan->add_option("--eps-decrement", sched.decrement, "epsilon decrement");
  plan->add_option("--eps-final", sched.final_eps, "final epsilon");
  plan->add_option("--max-expansions", sched.max_expansions, "expansion budget");
  plan->add_option("--turn-radius", turn_radius, "min turn radius (m)");
  plan->add_option("--arc-length", arc_length, "straight primitive length (m)");
  plan->add_option("--headings", headings, "heading bins");
  plan->add_option("--goal-tolerance", goal_tolerance, "goal tolerance (m)");
  plan->add_flag("--quiet", quiet, "suppress status output");

  std::string log_path;
  auto* replay = app.add_subcommand("replay", "rebuild the COP from a delivery log");
  replay->add_option("--log", log_path, "deliveries.log path")->required();
  replay->add_option("--out", out_dir, "output directory");
  replay->add_flag("--quiet", quiet, "suppress status output");

  std::string metrics_path;
  auto* report = app.add_subcommand("report", "pretty-print a metrics.csv");
  report->add_option("--metrics", metrics_path, "metrics.csv path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, seed_override, quiet);
    if (costmap->parsed()) {
      return cmd_costmap(cloud_path, out_dir, rparams, costmap_cell, quiet);
    }
    if (plan->parsed()) {
      return cmd_plan(costmap_path, start_text, waypoint_texts, out_dir, sched,
                      turn_radius, arc_length, headings, goal_tolerance, quiet);
    }
    if (replay->parsed()) return cmd_replay(log_path, out_dir, quiet);
    if (report->parsed()) return cmd_report(metrics_path);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error:\n%s\n", e.what());
    return kExitConfig;
  } catch (const geosim::PlanError& e) {
    std::fprintf(stderr, "planning failed: %s\n", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
