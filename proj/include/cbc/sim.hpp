#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbc/barriers.hpp"
#include "cbc/control.hpp"
#include "cbc/corridor.hpp"

namespace cbc {

class NonFiniteDerivative : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SystemKind { full, unicycle, linear };

const char* to_string(SystemKind kind);

using VectorField = std::function<Vec(const Vec&)>;

/// Classical fourth-order Runge-Kutta step.
[[nodiscard]] Vec rk4_step(const VectorField& field, const Vec& state, double dt);

/// Unicycle state is (x, y, theta); the heading is re-wrapped after each step.
[[nodiscard]] Vec unicycle_rk4_step(const Vec& state, const UnicycleCommand& cmd, double dt);

/// Default violation tolerance on barrier values and goal-control barriers.
inline constexpr double kViolationTol = 1e-6;

struct TrajectorySample {
  double t = 0.0;
  Vec state;
  Vec control;
  std::vector<double> h_values;
  /// Corridor slacks of the current goal, i.e. the goal-control barrier values.
  std::vector<double> goal_barriers;
  Vec goal;
  bool goal_in_corridor = false;
  std::optional<double> s_star;
};

struct Violation {
  std::size_t sample = 0;
  std::size_t barrier = 0;
  double value = 0.0;
};

enum class StopReason { duration, goal_reached, violation, goal_lost };

struct Trajectory {
  SystemKind kind = SystemKind::full;
  double dt = 0.0;
  std::vector<TrajectorySample> samples;
  StopReason stop = StopReason::duration;
  std::optional<Violation> violation;

  /// min over samples and barriers of h_i; +inf when nothing was logged.
  [[nodiscard]] double min_barrier() const;
  [[nodiscard]] double min_goal_barrier() const;
  [[nodiscard]] const Vec& final_state() const { return samples.back().state; }
};

class ViolationDetected : public std::runtime_error {
 public:
  ViolationDetected(Violation v, Trajectory partial);
  Violation violation;
  Trajectory partial;
};

/// Goal selected at one control step, plus the path parameter when it came
/// from a path.
struct GoalChoice {
  Vec goal;
  std::optional<double> s_star;
};

/// Everything run_closed_loop needs. The barrier family is evaluated at the
/// position part of the state (first two components for a unicycle).
struct ClosedLoopSpec {
  SystemKind kind = SystemKind::full;
  BarrierFamily family;
  std::optional<LinearPlant> plant;  // required for SystemKind::linear
  Vec initial_state;
  double duration = 10.0;
  double dt = 1e-3;
  double t0 = 0.0;

  /// Goal for the current state; nullopt means no goal could be selected.
  std::function<std::optional<GoalChoice>(const Vec& state)> goal_source;
  /// Control for the current state and goal, held over the step.
  std::function<Vec(const Vec& state, const GoalChoice& goal)> controller;
  /// Corridor at the current state, used to log goal membership and slacks.
  std::function<Corridor(const Vec& state)> corridor;
  /// Optional early termination once a sample is logged.
  std::function<bool(const Vec& state, const GoalChoice& goal)> reached;

  double violation_tol = kViolationTol;
  bool throw_on_violation = true;
};

/// Fixed-step closed-loop integration with zero-order-hold control. Logs one
/// sample per step; stops early when some h_i < -violation_tol (throwing
/// ViolationDetected unless disabled), when no goal is available, or when
/// `reached` fires.
[[nodiscard]] Trajectory run_closed_loop(const ClosedLoopSpec& spec);

/// x' = u under u = -kappa (x - g), goal fixed, logging BC_full membership.
[[nodiscard]] ClosedLoopSpec fully_actuated_goal_loop(const BarrierFamily& fam,
                                                      const CorridorParams& params, const Vec& x0,
                                                      const Vec& goal, double duration, double dt);

/// Unicycle under the safe velocity filter, goal fixed, logging BC_full,eps membership.
[[nodiscard]] ClosedLoopSpec unicycle_goal_loop(const BarrierFamily& fam,
                                                const CorridorParams& params, double kappa_w,
                                                const UnicyclePose& start, const Vec2& goal,
                                                double duration, double dt);

/// Linear plant under output regulation to y*, logging BC_lor membership.
[[nodiscard]] ClosedLoopSpec output_regulation_loop(const BarrierFamily& fam,
                                                    const LinearPlant& plant, double alpha_rate,
                                                    const Vec& x0, const Vec& y_star,
                                                    double duration, double dt);

/// Header row plus one line per sample: t, state, control, h_1..h_m, goal,
/// goal_in_corridor (0/1), s_star (empty when absent).
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Parses a CSV written by this library; throws on ragged rows.
[[nodiscard]] CsvTable read_csv(std::istream& is);

}  // namespace cbc
