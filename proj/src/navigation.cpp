#include "geosim/navigation.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>
#include <sstream>
#include <unordered_map>

#include "geosim/errors.hpp"

namespace geosim {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

int PrimitiveSet::nearest_heading(double yaw) const {
  const double bin_width = 2.0 * kPi / headings;
  long long b = std::llround(yaw / bin_width) % headings;
  if (b < 0) b += headings;
  return static_cast<int>(b);
}

std::vector<const MotionPrimitive*> PrimitiveSet::from_heading(int bin) const {
  // Generation is heading-major with a fixed count per heading.
  const std::size_t per_heading = primitives.size() / headings;
  std::vector<const MotionPrimitive*> out;
  out.reserve(per_heading);
  for (std::size_t i = 0; i < per_heading; ++i) {
    out.push_back(&primitives[bin * per_heading + i]);
  }
  return out;
}

namespace {

MotionPrimitive build_primitive(int start_heading, double theta, double kappa,
                                int dheading, double length, double cell_size) {
  MotionPrimitive prim;
  prim.start_heading = start_heading;
  prim.curvature = kappa;
  prim.arc_length = length;
  prim.dheading = dheading;

  auto arc_point = [&](double s) -> Vec2 {
    if (kappa == 0.0) return Vec2(s * std::cos(theta), s * std::sin(theta));
    return Vec2((std::sin(theta + kappa * s) - std::sin(theta)) / kappa,
                (-std::cos(theta + kappa * s) + std::cos(theta)) / kappa);
  };

  prim.end_offset = arc_point(length);
  prim.dcx = static_cast<int>(std::lround(prim.end_offset.x() / cell_size));
  prim.dcy = static_cast<int>(std::lround(prim.end_offset.y() / cell_size));
  const Vec2 snapped(prim.dcx * cell_size, prim.dcy * cell_size);
  const Vec2 correction = snapped - prim.end_offset;

  const int n = std::max(2, static_cast<int>(std::ceil(length / (cell_size / 4.0))) + 1);
  prim.samples.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double s = length * i / (n - 1);
    // Blend the snap correction along the arc so the endpoint is exact and
    // the interior stays continuous.
    prim.samples.push_back(arc_point(s) + (s / length) * correction);
  }

  for (const Vec2& p : prim.samples) {
    const int cx = static_cast<int>(std::floor(p.x() / cell_size + 0.5));
    const int cy = static_cast<int>(std::floor(p.y() / cell_size + 0.5));
    const std::pair<int, int> cell{cx, cy};
    if (std::find(prim.swept_cells.begin(), prim.swept_cells.end(), cell) ==
        prim.swept_cells.end()) {
      prim.swept_cells.push_back(cell);
    }
  }
  return prim;
}

}  // namespace

PrimitiveSet generate_primitives(double min_turn_radius, double arc_length,
                                 int headings, double cell_size) {
  if (min_turn_radius <= 0.0) throw ConfigError("min turn radius must be positive");
  if (headings < 4) throw ConfigError("need at least 4 heading bins");
  if (cell_size <= 0.0) throw ConfigError("cell size must be positive");
  const double bin = 2.0 * kPi / headings;
  if (arc_length < min_turn_radius * bin) {
    throw ConfigError("arc length too short to change one heading bin at the turning limit");
  }

  PrimitiveSet set;
  set.headings = headings;
  set.cell_size = cell_size;
  set.min_turn_radius = min_turn_radius;

  const double kappa_max = 1.0 / min_turn_radius;
  for (int h = 0; h < headings; ++h) {
    const double theta = h * bin;
    // straight, max-left, max-right, half-left, half-right; the turning arcs
    // sweep exactly one heading bin.
    set.primitives.push_back(
        build_primitive(h, theta, 0.0, 0, arc_length, cell_size));
    set.primitives.push_back(build_primitive(h, theta, kappa_max, +1,
                                             min_turn_radius * bin, cell_size));
    set.primitives.push_back(build_primitive(h, theta, -kappa_max, -1,
                                             min_turn_radius * bin, cell_size));
    set.primitives.push_back(build_primitive(
        h, theta, kappa_max / 2.0, +1, 2.0 * min_turn_radius * bin, cell_size));
    set.primitives.push_back(build_primitive(
        h, theta, -kappa_max / 2.0, -1, 2.0 * min_turn_radius * bin, cell_size));
  }
  return set;
}

std::vector<LatticeEdge> lattice_successors(const LatticeState& state,
                                            const PrimitiveSet& prims,
                                            const CostMapGlobal& map) {
  std::vector<LatticeEdge> out;
  for (const MotionPrimitive* p : prims.from_heading(state.heading)) {
    double sum = 0.0;
    bool traversable = true;
    for (const auto& [ox, oy] : p->swept_cells) {
      const int cx = state.ix + ox;
      const int cy = state.iy + oy;
      if (!map.contains(cx, cy) || !map.at(cx, cy).navigable) {
        traversable = false;
        break;
      }
      sum += map.at(cx, cy).cost;
    }
    if (!traversable) continue;
    LatticeEdge edge;
    edge.to = LatticeState{state.ix + p->dcx, state.iy + p->dcy,
                           (state.heading + p->dheading + prims.headings) %
                               prims.headings};
    edge.cost = p->arc_length * (sum / p->swept_cells.size());
    edge.primitive = p;
    out.push_back(edge);
  }
  return out;
}

namespace {

struct SearchNode {
  double g = kInf;
  bool closed = false;
  bool in_incons = false;
  long long parent = -1;
  const MotionPrimitive* via = nullptr;
};

struct HeapEntry {
  double f;
  double g;
  long long key;
};

// Total order (key is unique) keeps the expansion sequence deterministic.
struct HeapCompare {
  bool operator()(const HeapEntry& a, const HeapEntry& b) const {
    if (a.f != b.f) return a.f > b.f;
    if (a.g != b.g) return a.g < b.g;  // prefer deeper states on ties
    return a.key > b.key;
  }
};

}  // namespace

PlanResult plan_ara(const LatticeState& start, const Vec2& goal_utm,
                    double goal_tolerance, const CostMapGlobal& map,
                    const PrimitiveSet& prims, const EpsSchedule& sched) {
  if (!(sched.initial_eps >= sched.final_eps && sched.final_eps >= 1.0)) {
    throw ConfigError("epsilon schedule must satisfy initial >= final >= 1");
  }
  if (sched.decrement <= 0.0) throw ConfigError("epsilon decrement must be positive");
  if (goal_tolerance < map.cell_size) {
    throw ConfigError("goal tolerance must be at least one cell");
  }
  if (!map.contains(start.ix, start.iy) || !map.at(start.ix, start.iy).navigable) {
    throw PlanError(PlanFailure::unreachable_goal, "start cell is not navigable");
  }

  const double hscale = map.min_navigable_cost();
  const long long headings = prims.headings;
  auto key_of = [&](const LatticeState& s) {
    return (static_cast<long long>(s.iy) * map.width + s.ix) * headings + s.heading;
  };
  auto state_of = [&](long long key) {
    LatticeState s;
    s.heading = static_cast<int>(key % headings);
    const long long cell = key / headings;
    s.ix = static_cast<int>(cell % map.width);
    s.iy = static_cast<int>(cell / map.width);
    return s;
  };
  auto heuristic = [&](const LatticeState& s) {
    const double d = (map.cell_center(s.ix, s.iy) - goal_utm).norm();
    return std::max(0.0, d - goal_tolerance) * hscale;
  };
  auto is_goal = [&](const LatticeState& s) {
    return (map.cell_center(s.ix, s.iy) - goal_utm).norm() <= goal_tolerance;
  };

  std::unordered_map<long long, SearchNode> nodes;
  std::priority_queue<HeapEntry, std::vector<HeapEntry>, HeapCompare> open;

  const long long start_key = key_of(start);
  nodes[start_key].g = 0.0;

  double eps = sched.initial_eps;
  open.push({eps * heuristic(start), 0.0, start_key});

  double goal_g = kInf;
  long long goal_key = -1;
  if (is_goal(start)) {
    goal_g = 0.0;
    goal_key = start_key;
  }

  PlanResult result;
  const auto t_begin = std::chrono::steady_clock::now();
  auto budget_exhausted = [&]() {
    if (result.expansions >= sched.max_expansions) return true;
    if (sched.time_budget_s > 0.0) {
      const std::chrono::duration<double> dt =
          std::chrono::steady_clock::now() - t_begin;
      if (dt.count() >= sched.time_budget_s) return true;
    }
    return false;
  };

  bool stopped_early = false;
  while (true) {
    // ImprovePath at the current epsilon.
    while (!open.empty()) {
      const HeapEntry top = open.top();
      if (goal_g <= top.f) break;
      open.pop();
      {
        const SearchNode& n = nodes[top.key];
        if (n.closed || top.g != n.g) continue;  // stale entry
      }
      nodes[top.key].closed = true;
      result.expansions += 1;
      if (budget_exhausted()) {
        stopped_early = true;
        break;
      }
      const LatticeState s = state_of(top.key);
      const double g_s = top.g;
      for (const LatticeEdge& edge : lattice_successors(s, prims, map)) {
        const long long k2 = key_of(edge.to);
        SearchNode& succ = nodes[k2];
        const double g_new = g_s + edge.cost;
        if (g_new < succ.g) {
          succ.g = g_new;
          succ.parent = top.key;
          succ.via = edge.primitive;
          if (is_goal(edge.to) && g_new < goal_g) {
            goal_g = g_new;
            goal_key = k2;
          }
          if (!succ.closed) {
            open.push({g_new + eps * heuristic(edge.to), g_new, k2});
          } else if (!succ.in_incons) {
            succ.in_incons = true;
          }
        }
      }
    }

    if (stopped_early) break;
    if (goal_g == kInf) {
      // OPEN ran dry without touching the goal: the graph is exhausted.
      throw PlanError(PlanFailure::unreachable_goal, "goal is unreachable");
    }
    result.solutions.push_back({goal_g, eps});
    result.achieved_eps = eps;
    if (eps <= sched.final_eps) break;

    eps = std::max(sched.final_eps, eps - sched.decrement);
    // Rebuild OPEN from OPEN ∪ INCONS under the new epsilon; clear CLOSED.
    std::priority_queue<HeapEntry, std::vector<HeapEntry>, HeapCompare> fresh;
    for (auto& [key, node] : nodes) {
      if (node.g == kInf) continue;
      if (!node.closed || node.in_incons) {
        fresh.push({node.g + eps * heuristic(state_of(key)), node.g, key});
      }
      node.closed = false;
      node.in_incons = false;
    }
    open = std::move(fresh);
  }

  if (result.solutions.empty()) {
    throw PlanError(PlanFailure::timeout,
                    "search budget exhausted before the first solution");
  }

  // Walk backpointers, then densify primitive samples into the trajectory.
  std::vector<long long> chain;
  for (long long k = goal_key; k != -1; k = nodes.at(k).parent) chain.push_back(k);
  std::reverse(chain.begin(), chain.end());

  for (long long k : chain) result.states.push_back(state_of(k));

  Trajectory& traj = result.trajectory;
  const LatticeState s0 = result.states.front();
  const double bin = 2.0 * kPi / prims.headings;
  const Vec2 c0 = map.cell_center(s0.ix, s0.iy);
  traj.points.push_back({c0.x(), c0.y(), s0.heading * bin});
  traj.arc_length.push_back(0.0);
  for (std::size_t i = 1; i < chain.size(); ++i) {
    const SearchNode& node = nodes.at(chain[i]);
    const LatticeState from = result.states[i - 1];
    const Vec2 base = map.cell_center(from.ix, from.iy);
    const MotionPrimitive* p = node.via;
    for (std::size_t j = 1; j < p->samples.size(); ++j) {
      const Vec2 pos = base + p->samples[j];
      const double s_along = p->arc_length * j / (p->samples.size() - 1);
      const double heading = from.heading * bin + p->curvature * s_along;
      const TrajectoryPoint& prev = traj.points.back();
      const double ds = std::hypot(pos.x() - prev.x, pos.y() - prev.y);
      traj.points.push_back({pos.x(), pos.y(), heading});
      traj.arc_length.push_back(traj.arc_length.back() + ds);
    }
  }
  return result;
}

RouteResult plan_route_details(const VehicleState& start,
                               const std::vector<Vec2>& waypoints,
                               const CostMapGlobal& map, const PrimitiveSet& prims,
                               const EpsSchedule& sched, double goal_tolerance) {
  if (waypoints.empty()) throw ConfigError("route needs at least one waypoint");

  LatticeState state;
  map.index_of(start.position, state.ix, state.iy);
  state.heading = prims.nearest_heading(wrap_angle(start.heading));

  RouteResult route;
  Trajectory& out = route.trajectory;
  for (std::size_t leg = 0; leg < waypoints.size(); ++leg) {
    PlanResult result;
    try {
      result = plan_ara(state, waypoints[leg],
                        std::max(map.cell_size, goal_tolerance), map, prims,
                        sched);
    } catch (const PlanError& e) {
      std::ostringstream msg;
      msg << "leg " << (leg + 1) << " of " << waypoints.size() << " (to "
          << waypoints[leg].x() << ", " << waypoints[leg].y()
          << ") failed: " << e.what();
      throw PlanError(e.failure(), msg.str());
    }
    const Trajectory& piece = result.trajectory;
    const std::size_t skip = out.points.empty() ? 0 : 1;
    for (std::size_t i = skip; i < piece.points.size(); ++i) {
      if (out.points.empty()) {
        out.points.push_back(piece.points[i]);
        out.arc_length.push_back(0.0);
      } else {
        const TrajectoryPoint& prev = out.points.back();
        const double ds =
            std::hypot(piece.points[i].x - prev.x, piece.points[i].y - prev.y);
        out.points.push_back(piece.points[i]);
        out.arc_length.push_back(out.arc_length.back() + ds);
      }
    }
    state = result.states.back();
    route.legs.push_back(std::move(result));
  }
  return route;
}

Trajectory plan_route(const VehicleState& start, const std::vector<Vec2>& waypoints,
                      const CostMapGlobal& map, const PrimitiveSet& prims,
                      const EpsSchedule& sched, double goal_tolerance) {
  return plan_route_details(start, waypoints, map, prims, sched, goal_tolerance)
      .trajectory;
}

std::optional<DriveCommand> pure_pursuit(const VehicleState& state,
                                         const Trajectory& traj, double lookahead,
                                         double speed, double min_turn_radius) {
  if (traj.empty()) return std::nullopt;

  std::size_t nearest = 0;
  double best = kInf;
  for (std::size_t i = 0; i < traj.points.size(); ++i) {
    const double dx = traj.points[i].x - state.position.x();
    const double dy = traj.points[i].y - state.position.y();
    const double d2 = dx * dx + dy * dy;
    if (d2 < best) {
      best = d2;
      nearest = i;
    }
  }

  const double s_nearest = traj.arc_length[nearest];
  if (traj.total_length() - s_nearest < lookahead / 2.0) return std::nullopt;

  const double s_target = s_nearest + lookahead;
  const auto it = std::lower_bound(traj.arc_length.begin(), traj.arc_length.end(),
                                   s_target);
  const std::size_t ti = it == traj.arc_length.end()
                             ? traj.points.size() - 1
                             : static_cast<std::size_t>(it - traj.arc_length.begin());

  const double dx = traj.points[ti].x - state.position.x();
  const double dy = traj.points[ti].y - state.position.y();
  const double l2 = dx * dx + dy * dy;

  DriveCommand cmd;
  cmd.speed = speed;
  if (l2 > 1e-12) {
    const double y_local =
        -std::sin(state.heading) * dx + std::cos(state.heading) * dy;
    const double kappa_max = 1.0 / min_turn_radius;
    cmd.curvature = std::clamp(2.0 * y_local / l2, -kappa_max, kappa_max);
  }
  return cmd;
}

VehicleState step_vehicle(const VehicleState& state, const DriveCommand& cmd,
                          double dt) {
  if (dt <= 0.0) throw std::invalid_argument("step_vehicle: dt must be positive");
  VehicleState out = state;
  const double ds = cmd.speed * dt;
  if (std::abs(cmd.curvature) < 1e-12) {
    out.position += ds * Vec2(std::cos(state.heading), std::sin(state.heading));
  } else {
    const double h2 = state.heading + ds * cmd.curvature;
    out.position.x() += (std::sin(h2) - std::sin(state.heading)) / cmd.curvature;
    out.position.y() += (-std::cos(h2) + std::cos(state.heading)) / cmd.curvature;
    out.heading = h2;
  }
  out.speed = cmd.speed;
  out.curvature = cmd.curvature;
  out.time += dt;
  return out;
}

std::string trajectory_to_geojson(const Trajectory& traj) {
  std::string out =
      "{\"type\":\"FeatureCollection\",\"features\":[{\"type\":\"Feature\","
      "\"properties\":{\"length_m\":";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", traj.total_length());
  out += buf;
  out += "},\"geometry\":{\"type\":\"LineString\",\"coordinates\":[";
  for (std::size_t i = 0; i < traj.points.size(); ++i) {
    if (i) out += ",";
    std::snprintf(buf, sizeof(buf), "[%.6f,%.6f]", traj.points[i].x,
                  traj.points[i].y);
    out += buf;
  }
  if (traj.points.size() == 1) {  // a LineString needs two positions
    std::snprintf(buf, sizeof(buf), ",[%.6f,%.6f]", traj.points[0].x,
                  traj.points[0].y);
    out += buf;
  }
  out += "]}}]}";
  return out;
}

}  // namespace geosim
