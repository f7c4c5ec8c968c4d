#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbc/barriers.hpp"
#include "cbc/control.hpp"
#include "cbc/corridor.hpp"
#include "cbc/path.hpp"
#include "cbc/sim.hpp"
#include "cbc/world.hpp"

namespace cbc {

class GoalLost : public std::runtime_error {
 public:
  GoalLost(double t, Trajectory partial);
  double t;
  Trajectory partial;
};

struct PathGoal {
  double s_star = 0.0;
  Vec2 point = Vec2::Zero();
  std::size_t sample = 0;
};

/// Largest s_k = k / (n - 1) whose path point is a corridor member. Every
/// sample is eligible, so a path that leaves and re-enters the corridor is
/// handled. nullopt when no sample is a member.
[[nodiscard]] std::optional<PathGoal> select_path_goal(const Path& path, const Corridor& corridor,
                                                       std::size_t n_samples);

struct FollowParams {
  /// kappa is the proportional gain (kappa_v for a unicycle).
  CorridorParams corridor;
  double kappa_w = 2.0;
  double dt = 1e-3;
  double t_max = 20.0;
  /// <= 0 selects the default: 2 eps for a unicycle, 1e-3 otherwise.
  double goal_tol = 0.0;
  /// 0 selects default_path_samples(path, resolution).
  std::size_t n_samples = 0;
  double resolution = 0.05;
  double violation_tol = kViolationTol;
  bool throw_on_violation = true;
  /// Skip the strict-safety and initial-intersection checks (comparison runs).
  bool check_preconditions = true;
};

[[nodiscard]] double follow_goal_tolerance(SystemKind kind, const FollowParams& params);

/// Chases the farthest path point inside BC_full (BC_full,eps for a unicycle),
/// reselected at every step. State is the position (full) or (x, y, theta).
/// Throws PreconditionViolated when the path is not strictly safe (h_i > 0,
/// or > eps for a unicycle) or misses the initial corridor, and GoalLost when
/// selection comes back empty mid-run.
[[nodiscard]] Trajectory follow_path(SystemKind kind, const Path& path, const BarrierFamily& fam,
                                     const FollowParams& params, const Vec& x0);

/// min over i and over `samples` + 1 evenly spaced points of [a, b] of h_i:
/// the barrier seen by a robot moving straight from a to b.
[[nodiscard]] double segment_min_barrier(const BarrierFamily& fam, const Vec& a, const Vec& b,
                                         std::size_t samples = 256);

/// Per sample, segment_min_barrier from the state's position to the selected goal.
[[nodiscard]] std::vector<double> goal_segment_barriers(const Trajectory& traj,
                                                        const BarrierFamily& fam);

enum class ObstacleMode {
  /// Hit points of the latest scan.
  sensor,
  /// Centres of occupied and unknown cells near the robot.
  map,
};

/// Obstacle points for corridor construction around `position`; `radius`
/// bounds the map-mode search.
[[nodiscard]] std::vector<Vec2> obstacle_points(ObstacleMode mode, const OccupancyGrid& known,
                                                const LidarScan& scan, const Vec2& position,
                                                double radius);

struct ExploreParams {
  double robot_radius = 0.05;  // r in h = ||x - q||^p - r^p
  double power = 1.0;          // p
  /// kappa is kappa_v. epsilon also sets the path-end tolerance 2 eps.
  CorridorParams corridor{1.0, 1.0, 0.05};
  double kappa_w = 2.0;
  double dt = 0.01;
  int n_beams = 360;
  double max_range = 5.0;
  /// Extra planner clearance on top of r + eps, metres.
  double clearance_margin = 0.025;
  double cost_weight = 1.0;
  double cycle_time_limit = 60.0;
  std::size_t max_cycles = 500;
  std::size_t stuck_cycles = 3;
  double violation_tol = kViolationTol;
  /// Radius of the map-mode corridor dump (sensor mode drives the robot).
  double map_mode_radius = 1.0;
};

/// Planner settings used by explore: cells need point clearance at least
/// r + eps + margin, and shortcuts keep it.
[[nodiscard]] PlanOptions exploration_plan_options(const ExploreParams& params);

struct ExploreSample {
  double t = 0.0;
  Eigen::Vector3d state = Eigen::Vector3d::Zero();
  double v = 0.0;
  double omega = 0.0;
  double min_h = 0.0;
  std::size_t n_barriers = 0;
  std::optional<double> s_star;
  std::size_t cycle = 0;
};

struct ExploreCycle {
  std::size_t index = 0;
  CellIndex frontier;
  Vec2 frontier_point = Vec2::Zero();
  Path path;
  OccupancyGrid map;  // snapshot when the cycle starts
  Polygon corridor_sensor;
  Polygon corridor_map;
  std::vector<Vec2> sensed_points;
  std::size_t new_cells = 0;
  /// reached, frontier_resolved, goal_lost, path_invalidated, precondition,
  /// time_limit, stalled, violation
  std::string end_reason;
  double t_start = 0.0;
  double t_end = 0.0;
  /// Linear speed commanded at the first step of the cycle.
  std::optional<double> first_speed;
};

struct ExplorationLog {
  std::vector<ExploreCycle> cycles;
  std::vector<ExploreSample> samples;
  OccupancyGrid final_map;
  /// True when select_frontier ran out of frontiers.
  bool completed = false;
  std::optional<std::string> violation;
  double min_barrier = 0.0;
  std::size_t reachable_free = 0;
  std::size_t known_reachable_free = 0;
  double wall_time_s = 0.0;

  [[nodiscard]] double coverage() const {
    return reachable_free == 0 ? 1.0
                               : static_cast<double>(known_reachable_free) /
                                     static_cast<double>(reachable_free);
  }
};

class Stuck : public std::runtime_error {
 public:
  explicit Stuck(ExplorationLog partial);
  ExplorationLog partial;
};

/// Free cells of `truth` 4-connected to the cell containing `p`.
[[nodiscard]] std::vector<CellIndex> reachable_free_cells(const OccupancyGrid& truth, const Vec2& p);

/// Frontier exploration: scan, map, pick a frontier, plan, then follow with
/// the safe unicycle filter over sensor corridors until the path end is
/// reached, the frontier is resolved, or the path stops being usable. Throws
/// PreconditionViolated if the start is unsafe under the first scan, and
/// Stuck after `stuck_cycles` cycles in a row that map nothing new.
[[nodiscard]] ExplorationLog explore(const OccupancyGrid& truth, const UnicyclePose& start,
                                     const ExploreParams& params);

/// map_NNN.txt, path_NNN.txt, corridor_sensor_NNN.txt, corridor_map_NNN.txt,
/// points_NNN.txt per cycle, plus trajectory.csv, final_map.txt, summary.json.
void write_exploration_log(const ExplorationLog& log, const ExploreParams& params,
                           const std::filesystem::path& dir);

}  // namespace cbc
