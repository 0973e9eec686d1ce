#include "geosim/terrain.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "geosim/errors.hpp"

namespace geosim {
namespace {

// Spatial hash over (x, y) bins for radius queries.
struct BinGrid {
  double bin_size;
  std::unordered_map<std::int64_t, std::vector<int>> bins;

  static std::int64_t key(std::int64_t bx, std::int64_t by) {
    return (bx << 32) ^ (by & 0xffffffffLL);
  }

  explicit BinGrid(const std::vector<Vec3>& points, double bin_size)
      : bin_size(bin_size) {
    for (int i = 0; i < static_cast<int>(points.size()); ++i) {
      const auto bx = static_cast<std::int64_t>(std::floor(points[i].x() / bin_size));
      const auto by = static_cast<std::int64_t>(std::floor(points[i].y() / bin_size));
      bins[key(bx, by)].push_back(i);
    }
  }

  void gather(const std::vector<Vec3>& points, const Vec2& center, double radius,
              std::vector<int>& out) const {
    out.clear();
    const double r2 = radius * radius;
    const auto bx0 = static_cast<std::int64_t>(std::floor((center.x() - radius) / bin_size));
    const auto bx1 = static_cast<std::int64_t>(std::floor((center.x() + radius) / bin_size));
    const auto by0 = static_cast<std::int64_t>(std::floor((center.y() - radius) / bin_size));
    const auto by1 = static_cast<std::int64_t>(std::floor((center.y() + radius) / bin_size));
    for (std::int64_t bx = bx0; bx <= bx1; ++bx) {
      for (std::int64_t by = by0; by <= by1; ++by) {
        const auto it = bins.find(key(bx, by));
        if (it == bins.end()) continue;
        for (int i : it->second) {
          const double dx = points[i].x() - center.x();
          const double dy = points[i].y() - center.y();
          if (dx * dx + dy * dy <= r2) out.push_back(i);
        }
      }
    }
  }
};

std::optional<double> roughness_of_indices(const std::vector<Vec3>& points,
                                           const std::vector<int>& idx,
                                           int min_points) {
  if (static_cast<int>(idx.size()) < min_points) return std::nullopt;

  Vec3 centroid = Vec3::Zero();
  for (int i : idx) centroid += points[i];
  centroid /= static_cast<double>(idx.size());

  Mat3 scatter = Mat3::Zero();
  for (int i : idx) {
    const Vec3 d = points[i] - centroid;
    scatter += d * d.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  const Vec3 normal = eig.eigenvectors().col(0);  // smallest principal axis

  double sum = 0.0;
  for (int i : idx) sum += std::abs(normal.dot(points[i] - centroid));
  return sum / static_cast<double>(idx.size());
}

}  // namespace

std::optional<double> roughness(const PointCloudWorld& cloud, const Vec2& center,
                                const RoughnessParams& params) {
  std::vector<int> idx;
  const double r2 = params.radius * params.radius;
  for (int i = 0; i < static_cast<int>(cloud.points.size()); ++i) {
    const double dx = cloud.points[i].x() - center.x();
    const double dy = cloud.points[i].y() - center.y();
    if (dx * dx + dy * dy <= r2) idx.push_back(i);
  }
  return roughness_of_indices(cloud.points, idx, params.min_points);
}

void CostMapGlobal::index_of(const Vec2& utm, int& ix, int& iy) const {
  ix = static_cast<int>(std::floor((utm.x() - origin_utm.x()) / cell_size));
  iy = static_cast<int>(std::floor((utm.y() - origin_utm.y()) / cell_size));
}

double CostMapGlobal::min_navigable_cost() const {
  double best = std::numeric_limits<double>::infinity();
  for (const CostCell& c : cells) {
    if (c.navigable) best = std::min(best, c.cost);
  }
  return best;
}

CostMapGlobal build_global_costmap(const PointCloudWorld& cloud,
                                   const RoughnessParams& params,
                                   double cell_size, double cost_max) {
  if (cloud.points.empty()) throw ConfigError("costmap: empty point cloud");
  if (cell_size <= 0.0) throw ConfigError("costmap: cell size must be positive");

  Vec2 lo(cloud.points[0].x(), cloud.points[0].y());
  Vec2 hi = lo;
  for (const Vec3& p : cloud.points) {
    lo.x() = std::min(lo.x(), p.x());
    lo.y() = std::min(lo.y(), p.y());
    hi.x() = std::max(hi.x(), p.x());
    hi.y() = std::max(hi.y(), p.y());
  }

  CostMapGlobal map;
  map.cell_size = cell_size;
  map.origin_utm = lo;
  map.width = std::max(1, static_cast<int>(std::ceil((hi.x() - lo.x()) / cell_size)));
  map.height = std::max(1, static_cast<int>(std::ceil((hi.y() - lo.y()) / cell_size)));
  map.cells.assign(static_cast<std::size_t>(map.width) * map.height, CostCell{});

  const BinGrid grid(cloud.points, params.radius);
  std::vector<int> idx;
  for (int iy = 0; iy < map.height; ++iy) {
    for (int ix = 0; ix < map.width; ++ix) {
      grid.gather(cloud.points, map.cell_center(ix, iy), params.radius, idx);
      const auto r = roughness_of_indices(cloud.points, idx, params.min_points);
      CostCell& cell = map.at(ix, iy);
      if (!r.has_value()) continue;  // insufficient data, stays non-navigable
      cell.has_data = true;
      cell.roughness = *r;
      if (*r < params.threshold) {
        cell.navigable = true;
        cell.cost = 1.0 + (cost_max - 1.0) * (*r / params.threshold);
      }
    }
  }
  return map;
}

LocalElevationGrid::LocalElevationGrid(int width, int height, double cell_size)
    : cell_size(cell_size), width(width), height(height) {
  cells.assign(static_cast<std::size_t>(width) * height, ElevationCell{});
}

Vec2 LocalElevationGrid::cell_center(int ix, int iy) const {
  return Vec2((origin_ix + ix + 0.5) * cell_size, (origin_iy + iy + 0.5) * cell_size);
}

bool LocalElevationGrid::index_of(const Vec2& utm, int& ix, int& iy) const {
  const auto gx = static_cast<long long>(std::floor(utm.x() / cell_size));
  const auto gy = static_cast<long long>(std::floor(utm.y() / cell_size));
  ix = static_cast<int>(gx - origin_ix);
  iy = static_cast<int>(gy - origin_iy);
  return ix >= 0 && ix < width && iy >= 0 && iy < height;
}

namespace {

void scroll_grid(LocalElevationGrid& grid, const Pose& pose) {
  const Vec2 ahead(pose.position_utm.x() + grid.center_offset * std::cos(pose.yaw),
                   pose.position_utm.y() + grid.center_offset * std::sin(pose.yaw));
  const auto new_ox =
      static_cast<long long>(std::floor(ahead.x() / grid.cell_size)) - grid.width / 2;
  const auto new_oy =
      static_cast<long long>(std::floor(ahead.y() / grid.cell_size)) - grid.height / 2;

  if (!grid.initialized) {
    grid.origin_ix = new_ox;
    grid.origin_iy = new_oy;
    grid.center_utm = ahead;
    grid.initialized = true;
    return;
  }
  const long long dx = new_ox - grid.origin_ix;
  const long long dy = new_oy - grid.origin_iy;
  grid.center_utm = ahead;
  if (dx == 0 && dy == 0) return;

  std::vector<ElevationCell> shifted(grid.cells.size(), ElevationCell{});
  if (std::llabs(dx) < grid.width && std::llabs(dy) < grid.height) {
    for (int iy = 0; iy < grid.height; ++iy) {
      for (int ix = 0; ix < grid.width; ++ix) {
        const long long sx = ix + dx;  // same world cell in the old window
        const long long sy = iy + dy;
        if (sx >= 0 && sx < grid.width && sy >= 0 && sy < grid.height) {
          shifted[static_cast<std::size_t>(iy) * grid.width + ix] =
              grid.cells[static_cast<std::size_t>(sy) * grid.width + sx];
        }
      }
    }
  }
  grid.cells = std::move(shifted);
  grid.origin_ix = new_ox;
  grid.origin_iy = new_oy;
}

}  // namespace

void update_local_grid(LocalElevationGrid& grid, const std::vector<Vec3>& scan,
                       const Pose& vehicle_pose, double range_limit,
                       double voxel_size) {
  scroll_grid(grid, vehicle_pose);

  // Range filter, then one centroid per voxel.
  struct VoxelAcc {
    Vec3 sum = Vec3::Zero();
    int count = 0;
  };
  std::unordered_map<std::int64_t, VoxelAcc> voxels;
  std::vector<std::int64_t> order;  // deterministic iteration
  for (const Vec3& p : scan) {
    if ((p - vehicle_pose.position_utm).norm() > range_limit) continue;
    const auto vx = static_cast<std::int64_t>(std::floor(p.x() / voxel_size));
    const auto vy = static_cast<std::int64_t>(std::floor(p.y() / voxel_size));
    const auto vz = static_cast<std::int64_t>(std::floor(p.z() / voxel_size));
    // 21 bits per axis: unique for coordinates within +-2^20 cells.
    const std::int64_t key = ((vx & 0x1fffff) << 42) | ((vy & 0x1fffff) << 21) |
                             (vz & 0x1fffff);
    auto [it, inserted] = voxels.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.sum += p;
    it->second.count += 1;
  }

  // Buffer this scan's points per cell so occupancy is counted against the
  // elevation that includes them, independent of in-scan order.
  std::unordered_map<std::size_t, std::vector<double>> cell_heights;
  std::vector<std::size_t> touched;
  for (std::int64_t key : order) {
    const VoxelAcc& acc = voxels.at(key);
    const Vec3 p = acc.sum / acc.count;
    int ix, iy;
    if (!grid.index_of(Vec2(p.x(), p.y()), ix, iy)) continue;
    const std::size_t flat = static_cast<std::size_t>(iy) * grid.width + ix;
    auto [it, inserted] = cell_heights.try_emplace(flat);
    if (inserted) touched.push_back(flat);
    it->second.push_back(p.z());
  }

  for (std::size_t flat : touched) {
    ElevationCell& cell = grid.cells[flat];
    for (double h : cell_heights.at(flat)) {
      cell.count += 1;
      if (cell.count == 1) {
        cell.min_height = h;
      } else {
        cell.min_height = std::min(cell.min_height, h);
      }
      const double delta = h - cell.mean_height;
      cell.mean_height += delta / static_cast<double>(cell.count);
      cell.m2 += delta * (h - cell.mean_height);
    }
    const double pop_std = std::sqrt(std::max(0.0, cell.m2) / cell.count);
    cell.elevation = std::max(cell.mean_height - pop_std, cell.min_height);
    for (double h : cell_heights.at(flat)) {
      if (h > cell.elevation + grid.clearance) cell.above_count += 1;
    }
    cell.occupancy = static_cast<double>(cell.above_count) / cell.count;
  }
}

std::vector<CellOccupancy> occupancy_costmap(const LocalElevationGrid& grid,
                                             double obstacle_threshold) {
  std::vector<CellOccupancy> out(grid.cells.size(), CellOccupancy::unknown);
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    const ElevationCell& c = grid.cells[i];
    if (c.count == 0) continue;
    out[i] = c.occupancy >= obstacle_threshold ? CellOccupancy::occupied
                                               : CellOccupancy::free_cell;
  }
  return out;
}

PointCloudWorld load_xyz_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open point cloud file: " + path);
  PointCloudWorld cloud;
  double x, y, z;
  while (in >> x >> y >> z) cloud.points.emplace_back(x, y, z);
  if (!in.eof()) throw ConfigError("malformed point cloud file: " + path);
  if (cloud.points.empty()) throw ConfigError("point cloud file has no points: " + path);
  return cloud;
}

namespace {
constexpr char kCostmapMagic[4] = {'G', 'S', 'C', 'M'};
}

void save_costmap(const CostMapGlobal& map, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write costmap: " + path);
  out.write(kCostmapMagic, 4);
  const std::uint32_t version = 1;
  const auto w = static_cast<std::uint32_t>(map.width);
  const auto h = static_cast<std::uint32_t>(map.height);
  out.write(reinterpret_cast<const char*>(&version), 4);
  const double ox = map.origin_utm.x(), oy = map.origin_utm.y();
  out.write(reinterpret_cast<const char*>(&ox), 8);
  out.write(reinterpret_cast<const char*>(&oy), 8);
  out.write(reinterpret_cast<const char*>(&map.cell_size), 8);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  for (const CostCell& c : map.cells) {
    out.write(reinterpret_cast<const char*>(&c.roughness), 8);
    const std::uint8_t nav = c.navigable ? 1 : 0;
    out.write(reinterpret_cast<const char*>(&nav), 1);
    const std::uint8_t has_data = c.has_data ? 1 : 0;
    out.write(reinterpret_cast<const char*>(&has_data), 1);
    const double cost = c.navigable ? c.cost : -1.0;  // inf encoded as -1
    out.write(reinterpret_cast<const char*>(&cost), 8);
  }
  if (!out) throw ConfigError("failed writing costmap: " + path);

  std::ofstream meta(path + ".meta");
  meta << "format: geosim costmap v1\n";
  meta << "origin_easting_m: " << ox << "\n";
  meta << "origin_northing_m: " << oy << "\n";
  meta << "cell_size_m: " << map.cell_size << "\n";
  meta << "width_cells: " << map.width << "\n";
  meta << "height_cells: " << map.height << "\n";
}

CostMapGlobal load_costmap(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open costmap: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCostmapMagic, 4) != 0) {
    throw ConfigError("not a geosim costmap: " + path);
  }
  std::uint32_t version = 0, w = 0, h = 0;
  double ox = 0, oy = 0, cell = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&ox), 8);
  in.read(reinterpret_cast<char*>(&oy), 8);
  in.read(reinterpret_cast<char*>(&cell), 8);
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  if (!in || version != 1) throw ConfigError("unsupported costmap version: " + path);

  CostMapGlobal map;
  map.origin_utm = Vec2(ox, oy);
  map.cell_size = cell;
  map.width = static_cast<int>(w);
  map.height = static_cast<int>(h);
  map.cells.resize(static_cast<std::size_t>(w) * h);
  for (CostCell& c : map.cells) {
    std::uint8_t nav = 0, has_data = 0;
    double cost = 0.0;
    in.read(reinterpret_cast<char*>(&c.roughness), 8);
    in.read(reinterpret_cast<char*>(&nav), 1);
    in.read(reinterpret_cast<char*>(&has_data), 1);
    in.read(reinterpret_cast<char*>(&cost), 8);
    c.navigable = nav != 0;
    c.has_data = has_data != 0;
    c.cost = c.navigable ? cost : std::numeric_limits<double>::infinity();
  }
  if (!in) throw ConfigError("truncated costmap: " + path);
  return map;
}

}  // namespace geosim
