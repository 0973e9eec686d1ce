#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "geosim/geometry.hpp"
#include "geosim/terrain.hpp"

namespace geosim {

/// Lattice state: costmap cell indices plus a discretized heading bin.
struct LatticeState {
  int ix = 0;
  int iy = 0;
  int heading = 0;

  bool operator==(const LatticeState&) const = default;
};

/// One precomputed arc for a given start heading bin. Offsets are relative to
/// the start cell center; `samples` trace the arc (warped so its endpoint
/// lands exactly on the snapped lattice pose) at fine spacing.
struct MotionPrimitive {
  int start_heading = 0;
  double curvature = 0.0;
  double arc_length = 0.0;
  Vec2 end_offset{0.0, 0.0};  // continuous, pre-snap
  int dheading = 0;
  int dcx = 0;  // snapped end cell offset
  int dcy = 0;
  std::vector<Vec2> samples;                  // warped arc, start to end
  std::vector<std::pair<int, int>> swept_cells;  // relative to start cell
};

struct PrimitiveSet {
  int headings = 16;
  double cell_size = 0.5;
  double min_turn_radius = 4.0;
  std::vector<MotionPrimitive> primitives;  // grouped by start heading

  double heading_angle(int bin) const { return bin * 2.0 * kPi / headings; }
  int nearest_heading(double yaw) const;
  /// Primitives usable from the given start heading bin.
  std::vector<const MotionPrimitive*> from_heading(int bin) const;
};

/// Five forward primitives per start heading: straight (length arc_length),
/// max-left/right at curvature 1/R sweeping exactly one heading bin, and
/// half-left/right at curvature 1/(2R) sweeping one bin. Throws ConfigError
/// when arc_length cannot accommodate a one-bin turn at full curvature.
PrimitiveSet generate_primitives(double min_turn_radius, double arc_length,
                                 int headings, double cell_size = 0.5);

struct TrajectoryPoint {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

/// Dense path with points at most 0.25 m apart and cumulative arc length.
struct Trajectory {
  std::vector<TrajectoryPoint> points;
  std::vector<double> arc_length;  // cumulative, same size as points

  double total_length() const { return arc_length.empty() ? 0.0 : arc_length.back(); }
  bool empty() const { return points.empty(); }
};

struct VehicleState {
  Vec2 position{0.0, 0.0};
  double heading = 0.0;
  double speed = 0.0;
  double curvature = 0.0;
  double time = 0.0;
};

struct EpsSchedule {
  double initial_eps = 3.0;
  double decrement = 0.5;
  double final_eps = 1.0;
  // Determinism-friendly budget; wall-clock limit is optional (<= 0 = off).
  long long max_expansions = 2'000'000;
  double time_budget_s = 0.0;
};

struct PlanSolution {
  double cost = 0.0;
  double eps = 0.0;
};

struct PlanResult {
  Trajectory trajectory;
  double achieved_eps = 0.0;
  long long expansions = 0;
  std::vector<PlanSolution> solutions;  // one per completed epsilon
  std::vector<LatticeState> states;     // lattice states along the path
};

/// Successor edge on the lattice graph; shared by the planner and by any
/// external search over the same graph.
struct LatticeEdge {
  LatticeState to;
  double cost = 0.0;
  const MotionPrimitive* primitive = nullptr;
};

/// Expands all traversable primitives from a state. Edge cost is
/// arc_length * mean cost of the swept cells; blocked or off-map sweeps are
/// omitted.
std::vector<LatticeEdge> lattice_successors(const LatticeState& state,
                                            const PrimitiveSet& prims,
                                            const CostMapGlobal& map);

/// Anytime repairing A*: weighted A* restarts over a decreasing epsilon
/// schedule, reusing OPEN/INCONS between restarts. Throws PlanError on an
/// unreachable goal, or on budget exhaustion before the first solution.
PlanResult plan_ara(const LatticeState& start, const Vec2& goal_utm,
                    double goal_tolerance, const CostMapGlobal& map,
                    const PrimitiveSet& prims, const EpsSchedule& sched);

struct RouteResult {
  Trajectory trajectory;
  std::vector<PlanResult> legs;
};

/// Plans consecutive legs through the waypoints, each leg starting with the
/// previous leg's end heading, and concatenates the dense trajectories.
/// Throws PlanError naming the failing leg.
RouteResult plan_route_details(const VehicleState& start,
                               const std::vector<Vec2>& waypoints,
                               const CostMapGlobal& map, const PrimitiveSet& prims,
                               const EpsSchedule& sched,
                               double goal_tolerance = 1.0);

Trajectory plan_route(const VehicleState& start, const std::vector<Vec2>& waypoints,
                      const CostMapGlobal& map, const PrimitiveSet& prims,
                      const EpsSchedule& sched, double goal_tolerance = 1.0);

struct DriveCommand {
  double speed = 0.0;
  double curvature = 0.0;
};

/// Pure-pursuit tracking law toward the point one lookahead ahead of the
/// nearest trajectory point: curvature = 2 * y_local / L^2, clamped to the
/// turning limit. Empty result means the path is finished (less than half a
/// lookahead remains).
std::optional<DriveCommand> pure_pursuit(const VehicleState& state,
                                         const Trajectory& traj,
                                         double lookahead = 8.0,
                                         double speed = 3.0,
                                         double min_turn_radius = 4.0);

/// Exact arc integration of the kinematic unicycle.
VehicleState step_vehicle(const VehicleState& state, const DriveCommand& cmd,
                          double dt);

/// Writes a trajectory as a GeoJSON LineString feature collection.
std::string trajectory_to_geojson(const Trajectory& traj);

}  // namespace geosim
