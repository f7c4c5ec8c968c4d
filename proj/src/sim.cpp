#include "cbc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace cbc {

const char* to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::full: return "full";
    case SystemKind::unicycle: return "unicycle";
    case SystemKind::linear: return "linear";
  }
  return "?";
}

Vec rk4_step(const VectorField& field, const Vec& state, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be > 0");
  auto eval = [&](const Vec& x) {
    Vec d = field(x);
    if (d.size() != state.size()) throw DimensionMismatch("rk4_step: derivative dimension mismatch");
    if (!d.allFinite()) throw NonFiniteDerivative("rk4_step: non-finite derivative");
    return d;
  };
  const Vec k1 = eval(state);
  const Vec k2 = eval(state + 0.5 * dt * k1);
  const Vec k3 = eval(state + 0.5 * dt * k2);
  const Vec k4 = eval(state + dt * k3);
  return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vec unicycle_rk4_step(const Vec& state, const UnicycleCommand& cmd, double dt) {
  if (state.size() != 3) throw DimensionMismatch("unicycle state is (x, y, theta)");
  const VectorField field = [&](const Vec& s) {
    Vec d(3);
    d << cmd.v * std::cos(s[2]), cmd.v * std::sin(s[2]), cmd.omega;
    return d;
  };
  Vec next = rk4_step(field, state, dt);
  next[2] = wrap_angle(next[2]);
  return next;
}

double Trajectory::min_barrier() const {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    for (double h : s.h_values) lo = std::min(lo, h);
  }
  return lo;
}

double Trajectory::min_goal_barrier() const {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    for (double h : s.goal_barriers) lo = std::min(lo, h);
  }
  return lo;
}

ViolationDetected::ViolationDetected(Violation v, Trajectory partial_traj)
    : std::runtime_error("barrier violation at sample " + std::to_string(v.sample) + ": h_" +
                         std::to_string(v.barrier + 1) + " = " + std::to_string(v.value)),
      violation(v),
      partial(std::move(partial_traj)) {}

namespace {

Vec barrier_point(SystemKind kind, const Vec& state) {
  return kind == SystemKind::unicycle ? Vec(state.head(2)) : state;
}

Vec advance(const ClosedLoopSpec& spec, const Vec& x, const Vec& u) {
  switch (spec.kind) {
    case SystemKind::full:
      return rk4_step([&](const Vec&) { return u; }, x, spec.dt);
    case SystemKind::unicycle:
      return unicycle_rk4_step(x, {u[0], u[1]}, spec.dt);
    case SystemKind::linear: {
      const LinearPlant& plant = *spec.plant;
      const Vec bu = plant.b * u;
      return rk4_step([&](const Vec& s) { return Vec(plant.a * s + bu); }, x, spec.dt);
    }
  }
  throw std::logic_error("unknown system kind");
}

}  // namespace

Trajectory run_closed_loop(const ClosedLoopSpec& spec) {
  if (!(spec.dt > 0.0)) throw std::invalid_argument("run_closed_loop: dt must be > 0");
  if (!(spec.duration >= 0.0)) throw std::invalid_argument("run_closed_loop: duration must be >= 0");
  if (!spec.goal_source || !spec.controller) {
    throw std::invalid_argument("run_closed_loop: goal source and controller are required");
  }
  if (spec.kind == SystemKind::linear && !spec.plant) {
    throw std::invalid_argument("run_closed_loop: linear system without a plant");
  }
  if (spec.kind == SystemKind::unicycle && spec.initial_state.size() != 3) {
    throw DimensionMismatch("unicycle state is (x, y, theta)");
  }

  Trajectory traj;
  traj.kind = spec.kind;
  traj.dt = spec.dt;
  const auto steps = static_cast<std::size_t>(std::llround(spec.duration / spec.dt));
  traj.samples.reserve(steps + 1);

  Vec x = spec.initial_state;
  for (std::size_t k = 0; k <= steps; ++k) {
    TrajectorySample sample;
    sample.t = spec.t0 + static_cast<double>(k) * spec.dt;
    sample.state = x;
    sample.h_values = spec.family.values(barrier_point(spec.kind, x));

    for (std::size_t i = 0; i < sample.h_values.size(); ++i) {
      if (sample.h_values[i] < -spec.violation_tol) {
        traj.violation = Violation{k, i, sample.h_values[i]};
        break;
      }
    }
    if (traj.violation) {
      traj.samples.push_back(std::move(sample));
      traj.stop = StopReason::violation;
      if (spec.throw_on_violation) throw ViolationDetected(*traj.violation, std::move(traj));
      return traj;
    }

    const std::optional<GoalChoice> goal = spec.goal_source(x);
    if (!goal) {
      traj.samples.push_back(std::move(sample));
      traj.stop = StopReason::goal_lost;
      return traj;
    }
    sample.goal = goal->goal;
    sample.s_star = goal->s_star;
    sample.control = spec.controller(x, *goal);
    if (spec.corridor) {
      const Corridor c = spec.corridor(x);
      sample.goal_barriers = corridor_slacks(c, goal->goal);
      sample.goal_in_corridor = corridor_contains(c, goal->goal, spec.violation_tol);
    }
    const Vec control = sample.control;
    traj.samples.push_back(std::move(sample));

    if (spec.reached && spec.reached(x, *goal)) {
      traj.stop = StopReason::goal_reached;
      return traj;
    }
    if (k == steps) break;
    x = advance(spec, x, control);
  }
  return traj;
}

ClosedLoopSpec fully_actuated_goal_loop(const BarrierFamily& fam, const CorridorParams& params,
                                        const Vec& x0, const Vec& goal, double duration, double dt) {
  params.validate();
  ClosedLoopSpec spec;
  spec.kind = SystemKind::full;
  spec.family = fam;
  spec.initial_state = x0;
  spec.duration = duration;
  spec.dt = dt;
  spec.goal_source = [goal](const Vec&) { return std::optional<GoalChoice>(GoalChoice{goal, {}}); };
  spec.controller = [kappa = params.kappa](const Vec& x, const GoalChoice& g) {
    return proportional_control(x, g.goal, kappa);
  };
  spec.corridor = [fam, params](const Vec& x) {
    return bc_full(fam, x, params, AnchorCheck::allow_unsafe);
  };
  return spec;
}

ClosedLoopSpec unicycle_goal_loop(const BarrierFamily& fam, const CorridorParams& params,
                                  double kappa_w, const UnicyclePose& start, const Vec2& goal,
                                  double duration, double dt) {
  params.validate();
  ClosedLoopSpec spec;
  spec.kind = SystemKind::unicycle;
  spec.family = fam;
  spec.initial_state = Vec(3);
  spec.initial_state << start.position, wrap_angle(start.heading);
  spec.duration = duration;
  spec.dt = dt;
  const Vec goal_vec = goal;
  spec.goal_source = [goal_vec](const Vec&) {
    return std::optional<GoalChoice>(GoalChoice{goal_vec, {}});
  };
  spec.controller = [fam, params, kappa_w](const Vec& s, const GoalChoice& g) {
    const UnicycleCommand cmd =
        safe_unicycle_velocity({s.head<2>(), s[2]}, g.goal.head<2>(), fam, params, kappa_w);
    Vec u(2);
    u << cmd.v, cmd.omega;
    return u;
  };
  spec.corridor = [fam, params](const Vec& s) {
    return bc_full(fam, s.head(2), params, AnchorCheck::allow_unsafe);
  };
  return spec;
}

ClosedLoopSpec output_regulation_loop(const BarrierFamily& fam, const LinearPlant& plant,
                                      double alpha_rate, const Vec& x0, const Vec& y_star,
                                      double duration, double dt) {
  ClosedLoopSpec spec;
  spec.kind = SystemKind::linear;
  spec.family = fam;
  spec.plant = plant;
  spec.initial_state = x0;
  spec.duration = duration;
  spec.dt = dt;
  spec.goal_source = [y_star](const Vec&) {
    return std::optional<GoalChoice>(GoalChoice{y_star, {}});
  };
  spec.controller = [plant](const Vec& x, const GoalChoice& g) {
    return output_regulation_control(x, g.goal, plant);
  };
  CorridorParams params;
  params.alpha_rate = alpha_rate;
  spec.corridor = [fam, plant, params](const Vec& x) {
    return bc_lor(fam, x, plant.a, plant.b, plant.c, plant.k, plant.x_map, params,
                  AnchorCheck::allow_unsafe);
  };
  return spec;
}

namespace {

std::vector<std::string> state_names(SystemKind kind, Eigen::Index n) {
  if (kind == SystemKind::unicycle) return {"x", "y", "theta"};
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < n; ++i) names.push_back("x" + std::to_string(i + 1));
  return names;
}

std::vector<std::string> control_names(SystemKind kind, Eigen::Index n) {
  if (kind == SystemKind::unicycle) return {"v", "omega"};
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < n; ++i) names.push_back("u" + std::to_string(i + 1));
  return names;
}

}  // namespace

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  if (traj.samples.empty()) throw std::invalid_argument("empty trajectory");
  const auto& first = traj.samples.front();
  // Terminal samples (violation, lost goal) carry no control; size from any sample that does.
  Eigen::Index n_control = 0;
  Eigen::Index n_goal = 0;
  for (const auto& s : traj.samples) {
    n_control = std::max(n_control, s.control.size());
    n_goal = std::max(n_goal, s.goal.size());
  }
  const std::size_t m = first.h_values.size();

  std::vector<std::string> header{"t"};
  for (auto& n : state_names(traj.kind, first.state.size())) header.push_back(n);
  for (auto& n : control_names(traj.kind, n_control)) header.push_back(n);
  for (std::size_t i = 0; i < m; ++i) header.push_back("h_" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < n_goal; ++i) header.push_back("g" + std::to_string(i + 1));
  header.push_back("goal_in_corridor");
  header.push_back("s_star");
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';

  std::ostringstream line;
  line << std::setprecision(12);
  for (const auto& s : traj.samples) {
    line.str("");
    line << s.t;
    for (Eigen::Index i = 0; i < s.state.size(); ++i) line << ',' << s.state[i];
    for (Eigen::Index i = 0; i < n_control; ++i) {
      line << ',';
      if (i < s.control.size()) line << s.control[i];
    }
    for (double h : s.h_values) line << ',' << h;
    for (Eigen::Index i = 0; i < n_goal; ++i) {
      line << ',';
      if (i < s.goal.size()) line << s.goal[i];
    }
    line << ',' << (s.goal_in_corridor ? 1 : 0) << ',';
    if (s.s_star) line << *s.s_star;
    os << line.str() << '\n';
  }
}

CsvTable read_csv(std::istream& is) {
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
  };
  CsvTable table;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("csv: missing header");
  table.header = split(line);
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto row = split(line);
    if (row.size() != table.header.size()) {
      throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected " +
                               std::to_string(table.header.size()) + " fields, got " +
                               std::to_string(row.size()));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace cbc
