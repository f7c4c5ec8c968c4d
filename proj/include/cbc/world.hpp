#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cbc/control.hpp"
#include "cbc/geom.hpp"
#include "cbc/path.hpp"

namespace cbc {

enum class CellState : std::uint8_t { free, occupied, unknown };

struct CellIndex {
  int ix = 0;
  int iy = 0;

  friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

class WorldFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GeometryMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Cell (ix, iy) covers [origin + (ix, iy) res, origin + (ix + 1, iy + 1) res).
/// Value type; copies are independent.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(int width, int height, double resolution, Vec2 origin,
                CellState fill = CellState::unknown);

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] double resolution() const { return resolution_; }
  [[nodiscard]] const Vec2& origin() const { return origin_; }
  [[nodiscard]] std::size_t size() const { return cells_.size(); }

  [[nodiscard]] bool in_bounds(int ix, int iy) const {
    return ix >= 0 && iy >= 0 && ix < width_ && iy < height_;
  }
  [[nodiscard]] bool in_bounds(const CellIndex& c) const { return in_bounds(c.ix, c.iy); }
  /// Row-major linear index, iy * width + ix.
  [[nodiscard]] std::size_t index(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(ix);
  }
  [[nodiscard]] std::size_t index(const CellIndex& c) const { return index(c.ix, c.iy); }
  [[nodiscard]] CellIndex cell(std::size_t linear) const;

  [[nodiscard]] CellState at(int ix, int iy) const { return cells_[index(ix, iy)]; }
  [[nodiscard]] CellState at(const CellIndex& c) const { return at(c.ix, c.iy); }
  void set(int ix, int iy, CellState s) { cells_[index(ix, iy)] = s; }
  void set(const CellIndex& c, CellState s) { set(c.ix, c.iy, s); }

  [[nodiscard]] Vec2 cell_center(const CellIndex& c) const;
  /// Cell containing p, or nullopt outside the grid.
  [[nodiscard]] std::optional<CellIndex> cell_of(const Vec2& p) const;
  [[nodiscard]] bool contains_point(const Vec2& p) const { return cell_of(p).has_value(); }

  [[nodiscard]] std::size_t count(CellState s) const;
  [[nodiscard]] bool same_geometry(const OccupancyGrid& other) const;
  [[nodiscard]] std::span<const CellState> cells() const { return cells_; }

  friend bool operator==(const OccupancyGrid&, const OccupancyGrid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  double resolution_ = 1.0;
  Vec2 origin_ = Vec2::Zero();
  std::vector<CellState> cells_;
};

/// Header "res <m> origin <x> <y>", then one line per row, top row first
/// ('#' occupied, '.' free, '?' unknown).
[[nodiscard]] OccupancyGrid load_world(std::string_view text);
[[nodiscard]] OccupancyGrid load_world_file(const std::string& path);
[[nodiscard]] std::string save_world(const OccupancyGrid& grid);

class PoseOutOfBounds : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class PoseInObstacle : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Exact cell stepping along the ray p + t d, t >= 0, |d| = 1. `visit` gets
/// each cell with the parameter at which the ray enters it (0 for the start
/// cell) and returns false to stop. Stops on leaving the grid or once the
/// next entry parameter exceeds max_t. Passing exactly through a corner steps
/// diagonally.
void traverse_ray(const OccupancyGrid& grid, const Vec2& p, const Vec2& d, double max_t,
                  const std::function<bool(const CellIndex&, double)>& visit);

struct LidarBeam {
  double angle = 0.0;  // body frame, relative to the heading
  double range = 0.0;
  std::optional<Vec2> hit;
  std::optional<CellIndex> hit_cell;
};

struct LidarScan {
  UnicyclePose pose;
  double max_range = 0.0;
  std::vector<LidarBeam> beams;
  /// Geometry of the grid that was scanned; update_map checks it.
  int grid_width = 0;
  int grid_height = 0;
  double grid_resolution = 0.0;
  Vec2 grid_origin = Vec2::Zero();

  [[nodiscard]] std::vector<Vec2> hit_points() const;
};

/// n_beams at angles -pi + 2 pi k / n relative to the heading. A beam stops at
/// the entering face of the first occupied cell closer than max_range; rays
/// leaving the grid report no hit. Unknown truth cells are transparent.
[[nodiscard]] LidarScan lidar_scan(const OccupancyGrid& truth, const UnicyclePose& pose,
                                   int n_beams, double max_range);

/// Marks unknown cells traversed before each hit (or up to max_range) free and
/// unknown hit cells occupied. Known cells are never changed. Returns the
/// number of newly known cells.
std::size_t update_map_in_place(OccupancyGrid& known, const LidarScan& scan);
[[nodiscard]] OccupancyGrid update_map(const OccupancyGrid& known, const LidarScan& scan);

/// Free cells with at least one unknown 4-neighbour, in linear-index order.
[[nodiscard]] std::vector<CellIndex> frontier_cells(const OccupancyGrid& known);

/// Stand-in for "no obstacle anywhere", in metres.
inline constexpr double kNoObstacleDistance = 1e9;

enum class ObstacleSet { occupied_and_unknown, occupied_only };

/// Distance from each cell centre to the nearest obstacle cell centre.
struct DistanceField {
  int width = 0;
  int height = 0;
  double resolution = 1.0;
  std::vector<double> metres;
  /// Exact Euclidean transform (no chamfer approximation).
  bool exact = true;
  std::string method = "exact_edt";

  [[nodiscard]] double at(const CellIndex& c) const {
    return metres[static_cast<std::size_t>(c.iy) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(c.ix)];
  }
};

/// Exact Euclidean distance transform (separable lower-envelope algorithm).
[[nodiscard]] DistanceField distance_transform(
    const OccupancyGrid& known, ObstacleSet obstacles = ObstacleSet::occupied_and_unknown);

/// Lower bound on the distance from p to every obstacle cell (as a filled
/// square): field(c) - |p - centre(c)| - res / sqrt 2, floored at 0, where c
/// is the cell containing p. Zero outside the grid.
[[nodiscard]] double point_clearance(const OccupancyGrid& grid, const DistanceField& field,
                                     const Vec2& p);

class Unreachable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PlanOptions {
  /// w in step * (1 + w / max(clearance, res)), metres.
  double cost_weight = 1.0;
  /// Paths pass only through cells with point clearance >= this (occupied
  /// only); the start and the final cell are exempt.
  double min_clearance = 0.0;
  /// Shortcuts may not bring the path clearance below this.
  double smoothing_clearance = 0.0;
};

struct PlannedPath {
  std::vector<CellIndex> cells;  // optimal grid path, start to goal
  std::vector<Vec2> raw;         // centres of `cells`
  Path path;                     // shortcut polyline
  double cost = 0.0;             // Dijkstra cost of `cells`
  /// Cost density integrated along the polylines (same sampler for both).
  double raw_cost_integral = 0.0;
  double smoothed_cost_integral = 0.0;
  /// Minimum point_clearance over polyline samples (occupied only).
  double raw_min_clearance = 0.0;
  double smoothed_min_clearance = 0.0;
};

/// Dijkstra over 8-connected free cells (no corner cutting). A free cell
/// below min_clearance can be the last cell of a path but is never expanded.
/// Clearance in the cost uses occupied-or-unknown obstacles; traversability and
/// smoothing use occupied cells only, so paths may end next to unknown space.
/// Throws Unreachable, or std::invalid_argument if start or goal is not free.
[[nodiscard]] PlannedPath plan_path(const OccupancyGrid& known, const CellIndex& start,
                                    const CellIndex& goal, const PlanOptions& options = {});

/// Single-source costs from `start` under plan_path's rules; +inf when unreachable.
struct CostMap {
  std::vector<double> cost;
  std::vector<double> length;  // geometric length of the optimal path
  std::vector<std::int64_t> parent;
};
[[nodiscard]] CostMap dijkstra(const OccupancyGrid& known, const CellIndex& start,
                               const PlanOptions& options);

/// Reachable frontier cell with the largest clearance from occupied cells;
/// ties go to the shorter path, then to the lower linear index. Cells listed
/// in `excluded` are skipped.
[[nodiscard]] std::optional<CellIndex> select_frontier(const OccupancyGrid& known,
                                                       const CellIndex& robot,
                                                       const PlanOptions& options = {},
                                                       std::span<const CellIndex> excluded = {});

}  // namespace cbc
