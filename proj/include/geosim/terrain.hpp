#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "geosim/geometry.hpp"

namespace geosim {

struct PointCloudWorld {
  std::vector<Vec3> points;
};

struct RoughnessParams {
  double radius = 1.5;
  double threshold = 0.15;
  int min_points = 3;
};

struct CostCell {
  double roughness = 0.0;
  bool navigable = false;
  bool has_data = false;  // false: too few neighbors to fit a plane
  double cost = std::numeric_limits<double>::infinity();
};

/// Global navigability grid. Non-navigable cells carry infinite cost;
/// navigable cells are scaled to [1, cost_max) monotone in roughness.
struct CostMapGlobal {
  Vec2 origin_utm{0.0, 0.0};
  double cell_size = 0.5;
  int width = 0;
  int height = 0;
  std::vector<CostCell> cells;

  const CostCell& at(int ix, int iy) const { return cells[iy * width + ix]; }
  CostCell& at(int ix, int iy) { return cells[iy * width + ix]; }
  bool contains(int ix, int iy) const {
    return ix >= 0 && ix < width && iy >= 0 && iy < height;
  }
  Vec2 cell_center(int ix, int iy) const {
    return origin_utm + Vec2((ix + 0.5) * cell_size, (iy + 0.5) * cell_size);
  }
  /// Grid indices for a UTM position (may be out of bounds).
  void index_of(const Vec2& utm, int& ix, int& iy) const;
  /// Smallest finite cost over navigable cells; used as the heuristic scale.
  double min_navigable_cost() const;
};

/// Mean absolute perpendicular distance of the neighborhood to its total
/// least-squares plane. Empty result when fewer than min_points neighbors.
std::optional<double> roughness(const PointCloudWorld& cloud, const Vec2& center,
                                const RoughnessParams& params);

/// Thresholded roughness over the whole cloud footprint, cell size 0.5 m by
/// default. Cells with too few neighbors are non-navigable. Throws
/// ConfigError on an empty cloud.
CostMapGlobal build_global_costmap(const PointCloudWorld& cloud,
                                   const RoughnessParams& params,
                                   double cell_size = 0.5,
                                   double cost_max = 10.0);

struct ElevationCell {
  std::int64_t count = 0;
  double mean_height = 0.0;
  double m2 = 0.0;  // sum of squared deviations
  double min_height = 0.0;
  std::int64_t above_count = 0;
  double elevation = 0.0;
  double occupancy = 0.0;
};

/// Scrolling elevation/occupancy grid kept centered ahead of the vehicle.
/// Statistics are single-pass (Welford) and survive scrolling for cells that
/// stay inside the window.
struct LocalElevationGrid {
  double cell_size = 0.5;
  int width = 0;
  int height = 0;
  double center_offset = 15.0;  // meters ahead of the vehicle
  double clearance = 0.3;       // above-ground margin for occupancy counting
  Vec2 center_utm{0.0, 0.0};
  // Integer cell coordinates of the window's lower-left corner.
  long long origin_ix = 0;
  long long origin_iy = 0;
  bool initialized = false;
  std::vector<ElevationCell> cells;

  LocalElevationGrid() = default;
  LocalElevationGrid(int width, int height, double cell_size);

  const ElevationCell& at(int ix, int iy) const { return cells[iy * width + ix]; }
  ElevationCell& at(int ix, int iy) { return cells[iy * width + ix]; }
  Vec2 cell_center(int ix, int iy) const;
  /// Window cell indices for a UTM position; false when outside the window.
  bool index_of(const Vec2& utm, int& ix, int& iy) const;
};

/// Range-filters and voxel-downsamples a scan (centroid per voxel), scrolls
/// the grid to 15 m ahead of the vehicle and folds the points into the
/// per-cell statistics. elevation = max(mean - population std, min height).
void update_local_grid(LocalElevationGrid& grid, const std::vector<Vec3>& scan,
                       const Pose& vehicle_pose, double range_limit = 50.0,
                       double voxel_size = 0.2);

enum class CellOccupancy : std::uint8_t { free_cell, occupied, unknown };

/// Thresholds per-cell occupancy; untouched cells are unknown.
std::vector<CellOccupancy> occupancy_costmap(const LocalElevationGrid& grid,
                                             double obstacle_threshold);

/// Reads whitespace-separated "x y z" text. Throws ConfigError when the file
/// is unreadable or contains no points.
PointCloudWorld load_xyz_text(const std::string& path);

/// Flat binary grid with a fixed little-endian header plus a plain-text
/// metadata sidecar at path + ".meta".
void save_costmap(const CostMapGlobal& map, const std::string& path);
CostMapGlobal load_costmap(const std::string& path);

}  // namespace geosim
