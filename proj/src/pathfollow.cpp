#include "cbc/pathfollow.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <queue>
#include <sstream>

#include <json.hpp>

namespace cbc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string describe_goal_lost(double t) {
  std::ostringstream os;
  os << "no path point inside the corridor at t = " << t;
  return os.str();
}

}  // namespace

GoalLost::GoalLost(double t_lost, Trajectory partial_traj)
    : std::runtime_error(describe_goal_lost(t_lost)), t(t_lost), partial(std::move(partial_traj)) {}

std::optional<PathGoal> select_path_goal(const Path& path, const Corridor& corridor,
                                         std::size_t n_samples) {
  if (n_samples < 2) throw std::invalid_argument("select_path_goal needs at least 2 samples");
  if (path.empty()) return std::nullopt;
  // The largest member over all samples is the first member scanning down.
  for (std::size_t k = n_samples; k-- > 0;) {
    const double s = static_cast<double>(k) / static_cast<double>(n_samples - 1);
    const Vec2 p = path.at(s);
    if (corridor_contains(corridor, Vec(p))) return PathGoal{s, p, k};
  }
  return std::nullopt;
}

double follow_goal_tolerance(SystemKind kind, const FollowParams& params) {
  if (params.goal_tol > 0.0) return params.goal_tol;
  if (kind == SystemKind::unicycle) {
    return params.corridor.epsilon > 0.0 ? 2.0 * params.corridor.epsilon : 1e-3;
  }
  return 1e-3;
}

Trajectory follow_path(SystemKind kind, const Path& path, const BarrierFamily& fam,
                       const FollowParams& params, const Vec& x0) {
  params.corridor.validate();
  if (kind == SystemKind::linear) {
    throw std::invalid_argument("path following is defined for full and unicycle systems");
  }
  if (path.empty()) throw std::invalid_argument("follow_path: empty path");
  const Eigen::Index expected = kind == SystemKind::unicycle ? 3 : 2;
  if (x0.size() != expected) throw DimensionMismatch("follow_path: initial state has the wrong size");

  const std::size_t n_samples =
      params.n_samples > 0 ? params.n_samples : default_path_samples(path, params.resolution);
  const double margin = kind == SystemKind::unicycle ? params.corridor.epsilon : 0.0;
  const Vec position0 = x0.head(2);

  if (params.check_preconditions) {
    for (std::size_t k = 0; k < n_samples; ++k) {
      const double s = static_cast<double>(k) / static_cast<double>(n_samples - 1);
      const double h = fam.min_value(Vec(path.at(s)));
      if (!(h > margin)) {
        std::ostringstream os;
        os << "path is not strictly safe at s = " << s << " (min h = " << h << ")";
        throw PreconditionViolated(os.str());
      }
    }
    const Corridor c0 = bc_full(fam, position0, params.corridor, AnchorCheck::strict);
    if (!select_path_goal(path, c0, n_samples)) {
      throw PreconditionViolated("path does not meet the initial corridor");
    }
  }

  ClosedLoopSpec spec;
  spec.kind = kind;
  spec.family = fam;
  spec.initial_state = x0;
  if (kind == SystemKind::unicycle) spec.initial_state[2] = wrap_angle(x0[2]);
  spec.duration = params.t_max;
  spec.dt = params.dt;
  spec.violation_tol = params.violation_tol;
  spec.throw_on_violation = params.throw_on_violation;

  const CorridorParams cp = params.corridor;
  auto corridor_at = [fam, cp](const Vec& state) {
    return bc_full(fam, Vec(state.head(2)), cp, AnchorCheck::allow_unsafe);
  };
  spec.corridor = corridor_at;
  spec.goal_source = [corridor_at, path, n_samples](const Vec& state) -> std::optional<GoalChoice> {
    const auto goal = select_path_goal(path, corridor_at(state), n_samples);
    if (!goal) return std::nullopt;
    return GoalChoice{Vec(goal->point), goal->s_star};
  };
  if (kind == SystemKind::full) {
    spec.controller = [kappa = cp.kappa](const Vec& x, const GoalChoice& g) {
      return proportional_control(x, g.goal, kappa);
    };
  } else {
    spec.controller = [fam, cp, kappa_w = params.kappa_w](const Vec& s, const GoalChoice& g) {
      const UnicycleCommand cmd =
          safe_unicycle_velocity({s.head<2>(), s[2]}, g.goal.head<2>(), fam, cp, kappa_w);
      Vec u(2);
      u << cmd.v, cmd.omega;
      return u;
    };
  }
  const Vec2 end = path.back();
  const double tol = follow_goal_tolerance(kind, params);
  spec.reached = [end, tol](const Vec& state, const GoalChoice&) {
    return (Vec2(state.head<2>()) - end).norm() <= tol;
  };

  Trajectory traj = run_closed_loop(spec);
  if (traj.stop == StopReason::goal_lost) {
    const double t = traj.samples.back().t;
    throw GoalLost(t, std::move(traj));
  }
  return traj;
}

double segment_min_barrier(const BarrierFamily& fam, const Vec& a, const Vec& b,
                           std::size_t samples) {
  if (samples < 1) throw std::invalid_argument("segment_min_barrier needs at least one interval");
  double lo = kInf;
  for (std::size_t k = 0; k <= samples; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(samples);
    lo = std::min(lo, fam.min_value(Vec(a + t * (b - a))));
  }
  return lo;
}

std::vector<double> goal_segment_barriers(const Trajectory& traj, const BarrierFamily& fam) {
  std::vector<double> out;
  out.reserve(traj.samples.size());
  for (const auto& s : traj.samples) {
    if (s.goal.size() == 0) continue;
    out.push_back(segment_min_barrier(fam, Vec(s.state.head(2)), s.goal));
  }
  return out;
}

std::vector<Vec2> obstacle_points(ObstacleMode mode, const OccupancyGrid& known,
                                  const LidarScan& scan, const Vec2& position, double radius) {
  if (mode == ObstacleMode::sensor) return scan.hit_points();
  std::vector<Vec2> out;
  const double res = known.resolution();
  const auto centre = known.cell_of(position);
  if (!centre) return out;
  const int reach = static_cast<int>(std::ceil(radius / res)) + 1;
  for (int iy = centre->iy - reach; iy <= centre->iy + reach; ++iy) {
    for (int ix = centre->ix - reach; ix <= centre->ix + reach; ++ix) {
      if (!known.in_bounds(ix, iy) || known.at(ix, iy) == CellState::free) continue;
      const Vec2 c = known.cell_center({ix, iy});
      if ((c - position).norm() <= radius) out.push_back(c);
    }
  }
  return out;
}

PlanOptions exploration_plan_options(const ExploreParams& params) {
  PlanOptions opt;
  opt.cost_weight = params.cost_weight;
  opt.min_clearance = params.robot_radius + params.corridor.epsilon + params.clearance_margin;
  opt.smoothing_clearance = opt.min_clearance;
  return opt;
}

Stuck::Stuck(ExplorationLog partial_log)
    : std::runtime_error("exploration made no map progress for several cycles"),
      partial(std::move(partial_log)) {}

std::vector<CellIndex> reachable_free_cells(const OccupancyGrid& truth, const Vec2& p) {
  const auto start = truth.cell_of(p);
  if (!start) throw PoseOutOfBounds("position lies outside the grid");
  std::vector<CellIndex> out;
  if (truth.at(*start) != CellState::free) return out;
  std::vector<char> seen(truth.size(), 0);
  std::queue<CellIndex> open;
  open.push(*start);
  seen[truth.index(*start)] = 1;
  static constexpr int kDx[4] = {1, -1, 0, 0};
  static constexpr int kDy[4] = {0, 0, 1, -1};
  while (!open.empty()) {
    const CellIndex c = open.front();
    open.pop();
    out.push_back(c);
    for (int k = 0; k < 4; ++k) {
      const CellIndex nb{c.ix + kDx[k], c.iy + kDy[k]};
      if (!truth.in_bounds(nb) || seen[truth.index(nb)]) continue;
      if (truth.at(nb) != CellState::free) continue;
      seen[truth.index(nb)] = 1;
      open.push(nb);
    }
  }
  return out;
}

namespace {

bool is_frontier(const OccupancyGrid& g, const CellIndex& c) {
  if (g.at(c) != CellState::free) return false;
  static constexpr int kDx[4] = {1, -1, 0, 0};
  static constexpr int kDy[4] = {0, 0, 1, -1};
  for (int k = 0; k < 4; ++k) {
    const CellIndex nb{c.ix + kDx[k], c.iy + kDy[k]};
    if (g.in_bounds(nb) && g.at(nb) == CellState::unknown) return true;
  }
  return false;
}

Polygon corridor_polygon(const BarrierFamily& fam, const Vec2& position, const CorridorParams& cp,
                         double half_width) {
  const Corridor c = bc_full(fam, Vec(position), cp, AnchorCheck::allow_unsafe);
  return clip_corridor_2d(c, Box::centered(Vec(position), half_width));
}

void finalize(ExplorationLog& log, const OccupancyGrid& known, const std::vector<CellIndex>& reachable,
              std::chrono::steady_clock::time_point started) {
  log.final_map = known;
  log.known_reachable_free = static_cast<std::size_t>(
      std::count_if(reachable.begin(), reachable.end(),
                    [&](const CellIndex& c) { return known.at(c) == CellState::free; }));
  log.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
}

}  // namespace

ExplorationLog explore(const OccupancyGrid& truth, const UnicyclePose& start,
                       const ExploreParams& params) {
  const auto started = std::chrono::steady_clock::now();
  params.corridor.validate();
  if (!(params.robot_radius > 0.0)) throw std::invalid_argument("robot radius must be > 0");
  if (!(params.power > 0.0)) throw std::invalid_argument("barrier power must be > 0");
  if (!(params.dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  if (params.max_cycles == 0 || params.stuck_cycles == 0) {
    throw std::invalid_argument("cycle limits must be positive");
  }

  const double res = truth.resolution();
  OccupancyGrid known(truth.width(), truth.height(), res, truth.origin(), CellState::unknown);
  ExplorationLog log;
  log.min_barrier = kInf;
  const std::vector<CellIndex> reachable = reachable_free_cells(truth, start.position);
  log.reachable_free = reachable.size();

  const PlanOptions plan = exploration_plan_options(params);
  const CorridorParams& cp = params.corridor;
  const double goal_tol = cp.epsilon > 0.0 ? 2.0 * cp.epsilon : res;
  const double path_safety = params.robot_radius + cp.epsilon;

  Vec state(3);
  state << start.position, wrap_angle(start.heading);
  auto pose = [&] { return UnicyclePose{Vec2(state.head<2>()), state[2]}; };
  auto family_of = [&](const LidarScan& s) {
    return BarrierFamily::power_distance(s.hit_points(), params.robot_radius, params.power);
  };

  LidarScan scan = lidar_scan(truth, pose(), params.n_beams, params.max_range);
  update_map_in_place(known, scan);
  BarrierFamily fam = family_of(scan);
  if (!(fam.min_value(Vec(state.head(2))) > 0.0)) {
    throw PreconditionViolated("start pose is not safe under the first scan");
  }

  double t = 0.0;
  std::vector<CellIndex> excluded;
  std::size_t zero_progress = 0;

  for (std::size_t cycle = 0; cycle < params.max_cycles; ++cycle) {
    const auto robot_cell = known.cell_of(Vec2(state.head<2>()));
    if (!robot_cell) throw PoseOutOfBounds("robot left the grid");
    const auto frontier = select_frontier(known, *robot_cell, plan, excluded);
    if (!frontier) {
      log.completed = true;
      break;
    }
    PlannedPath planned;
    try {
      planned = plan_path(known, *robot_cell, *frontier, plan);
    } catch (const Unreachable&) {
      excluded.push_back(*frontier);
      continue;
    }

    ExploreCycle cyc;
    cyc.index = cycle;
    cyc.frontier = *frontier;
    cyc.frontier_point = known.cell_center(*frontier);
    cyc.path = planned.path;
    cyc.map = known;
    cyc.sensed_points = scan.hit_points();
    cyc.t_start = t;
    cyc.corridor_sensor = corridor_polygon(fam, pose().position, cp, params.max_range);
    cyc.corridor_map = corridor_polygon(
        BarrierFamily::power_distance(obstacle_points(ObstacleMode::map, known, scan,
                                                      pose().position, params.map_mode_radius),
                                      params.robot_radius, params.power),
        pose().position, cp, params.map_mode_radius);

    const Path& path = cyc.path;
    const std::size_t n_samples = default_path_samples(path, res);
    // Clearance of each path sample when the cycle starts; a sample only
    // invalidates the path once new obstacles push it below r + eps.
    std::vector<double> planned_clearance(n_samples);
    {
      const DistanceField field = distance_transform(known, ObstacleSet::occupied_only);
      for (std::size_t k = 0; k < n_samples; ++k) {
        const double s = static_cast<double>(k) / static_cast<double>(n_samples - 1);
        planned_clearance[k] = point_clearance(known, field, path.at(s));
      }
    }
    std::size_t occupied_count = known.count(CellState::occupied);
    const double t_limit = t + params.cycle_time_limit;
    std::string reason = "time_limit";
    // Stall window: the robot must move a quarter cell every two seconds.
    double window_t = t;
    Vec2 window_x = pose().position;

    while (true) {
      const Vec x = state.head(2);
      ExploreSample smp;
      smp.t = t;
      smp.state = state;
      smp.min_h = fam.min_value(x);
      smp.n_barriers = fam.size();
      smp.cycle = cycle;
      log.min_barrier = std::min(log.min_barrier, smp.min_h);

      auto stop = [&](const char* why) {
        log.samples.push_back(smp);
        reason = why;
      };
      if (smp.min_h < -params.violation_tol) {
        std::ostringstream os;
        os << "barrier violation at t = " << t << ": min h = " << smp.min_h;
        log.violation = os.str();
        stop("violation");
        break;
      }
      if ((Vec2(x) - path.back()).norm() <= goal_tol) {
        stop("reached");
        break;
      }
      if (!is_frontier(known, *frontier)) {
        stop("frontier_resolved");
        break;
      }
      if (t >= t_limit) {
        stop("time_limit");
        break;
      }
      if (t - window_t >= 2.0) {
        if ((Vec2(x) - window_x).norm() < 0.25 * res) {
          stop("stalled");
          break;
        }
        window_t = t;
        window_x = Vec2(x);
      }
      const Corridor corridor = bc_full(fam, x, cp, AnchorCheck::allow_unsafe);
      const auto goal = select_path_goal(path, corridor, n_samples);
      if (!goal) {
        stop("goal_lost");
        break;
      }
      smp.s_star = goal->s_star;
      UnicycleCommand cmd;
      try {
        cmd = safe_unicycle_velocity(pose(), goal->point, fam, cp, params.kappa_w);
      } catch (const PreconditionViolated&) {
        stop("precondition");
        break;
      }
      smp.v = cmd.v;
      smp.omega = cmd.omega;
      if (!cyc.first_speed) cyc.first_speed = cmd.v;
      log.samples.push_back(smp);

      state = unicycle_rk4_step(state, cmd, params.dt);
      t += params.dt;
      try {
        scan = lidar_scan(truth, pose(), params.n_beams, params.max_range);
      } catch (const std::invalid_argument& e) {
        log.violation = std::string("robot pose became invalid: ") + e.what();
        reason = "violation";
        break;
      }
      cyc.new_cells += update_map_in_place(known, scan);
      fam = family_of(scan);

      const std::size_t occupied_now = known.count(CellState::occupied);
      if (occupied_now != occupied_count) {
        occupied_count = occupied_now;
        const DistanceField field = distance_transform(known, ObstacleSet::occupied_only);
        bool invalid = false;
        for (std::size_t k = goal->sample; k < n_samples && !invalid; ++k) {
          const double s = static_cast<double>(k) / static_cast<double>(n_samples - 1);
          const double c = point_clearance(known, field, path.at(s));
          invalid = c < planned_clearance[k] && c < path_safety;
        }
        if (invalid) {
          reason = "path_invalidated";
          break;
        }
      }
    }

    cyc.end_reason = reason;
    cyc.t_end = t;
    const bool progress = cyc.new_cells > 0;
    const bool unresolved_at_end =
        (reason == "reached" || reason == "stalled") && is_frontier(known, *frontier);
    log.cycles.push_back(std::move(cyc));
    if (log.violation) break;

    if (!progress || unresolved_at_end) excluded.push_back(*frontier);
    zero_progress = progress ? 0 : zero_progress + 1;
    if (zero_progress >= params.stuck_cycles) {
      finalize(log, known, reachable, started);
      throw Stuck(std::move(log));
    }
  }

  finalize(log, known, reachable, started);
  return log;
}

namespace {

void write_points(const std::filesystem::path& file, const std::vector<Vec2>& pts) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << std::setprecision(9);
  for (const auto& p : pts) out << p.x() << ' ' << p.y() << '\n';
}

std::string numbered(const char* stem, std::size_t i, const char* ext) {
  std::ostringstream os;
  os << stem << '_' << std::setw(3) << std::setfill('0') << i << ext;
  return os.str();
}

}  // namespace

void write_exploration_log(const ExplorationLog& log, const ExploreParams& params,
                           const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json cycles = nlohmann::json::array();
  for (const auto& c : log.cycles) {
    {
      std::ofstream out(dir / numbered("map", c.index, ".txt"));
      out << save_world(c.map);
    }
    write_points(dir / numbered("path", c.index, ".txt"), c.path.waypoints());
    write_points(dir / numbered("points", c.index, ".txt"), c.sensed_points);
    for (const auto& [name, poly] : {std::pair{"corridor_sensor", &c.corridor_sensor},
                                     std::pair{"corridor_map", &c.corridor_map}}) {
      std::ofstream out(dir / numbered(name, c.index, ".txt"));
      write_polygons(out, std::span<const Polygon>(poly, 1));
    }
    nlohmann::json j;
    j["index"] = c.index;
    j["frontier_cell"] = {c.frontier.ix, c.frontier.iy};
    j["frontier_point"] = {c.frontier_point.x(), c.frontier_point.y()};
    j["path_length"] = c.path.length();
    j["new_cells"] = c.new_cells;
    j["end_reason"] = c.end_reason;
    j["t_start"] = c.t_start;
    j["t_end"] = c.t_end;
    j["first_speed"] = c.first_speed ? nlohmann::json(*c.first_speed) : nlohmann::json(nullptr);
    cycles.push_back(std::move(j));
  }

  {
    std::ofstream out(dir / "trajectory.csv");
    out << "t,x,y,theta,v,omega,min_h,n_barriers,s_star,cycle\n";
    out << std::setprecision(12);
    for (const auto& s : log.samples) {
      out << s.t << ',' << s.state[0] << ',' << s.state[1] << ',' << s.state[2] << ',' << s.v
          << ',' << s.omega << ',' << s.min_h << ',' << s.n_barriers << ',';
      if (s.s_star) out << *s.s_star;
      out << ',' << s.cycle << '\n';
    }
  }
  {
    std::ofstream out(dir / "final_map.txt");
    out << save_world(log.final_map);
  }

  nlohmann::json summary;
  summary["cycles"] = log.cycles.size();
  summary["completed"] = log.completed;
  summary["coverage"] = log.coverage();
  summary["reachable_free"] = log.reachable_free;
  summary["known_reachable_free"] = log.known_reachable_free;
  summary["min_barrier"] = std::isfinite(log.min_barrier) ? nlohmann::json(log.min_barrier)
                                                          : nlohmann::json(nullptr);
  summary["wall_time_s"] = log.wall_time_s;
  summary["violation"] = log.violation ? nlohmann::json(*log.violation) : nlohmann::json(nullptr);
  summary["robot_radius"] = params.robot_radius;
  summary["epsilon"] = params.corridor.epsilon;
  summary["samples"] = log.samples.size();
  summary["cycle_log"] = std::move(cycles);
  std::ofstream out(dir / "summary.json");
  out << summary.dump(2) << '\n';
}

}  // namespace cbc
