#include "cbc/control.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace cbc {

double wrap_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double wrapped = std::fmod(angle + std::numbers::pi, two_pi);
  if (wrapped < 0.0) wrapped += two_pi;
  wrapped -= std::numbers::pi;
  // fmod rounding can land exactly on +pi.
  if (wrapped >= std::numbers::pi) wrapped -= two_pi;
  return wrapped;
}

Vec proportional_control(const Vec& x, const Vec& g, double kappa) {
  if (x.size() != g.size()) throw DimensionMismatch("state and goal dimensions differ");
  return -kappa * (x - g);
}

UnicycleCommand unicycle_reference_control(const UnicyclePose& pose, const Vec2& g, double kappa_v,
                                           double kappa_w) {
  const Vec2 to_goal = g - pose.position;
  if (to_goal.norm() < kGoalReachedRadius) return {};
  const Vec2 o = heading_vector(pose.heading);
  const Vec2 n = lateral_vector(pose.heading);
  UnicycleCommand cmd;
  cmd.v = kappa_v * o.dot(to_goal);
  cmd.omega = kappa_w * wrap_angle(std::atan2(n.dot(to_goal), o.dot(to_goal)));
  return cmd;
}

ScalarInterval scalar_feasible_interval(std::span<const ScalarConstraint> constraints) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  ScalarInterval iv;
  for (const auto& c : constraints) {
    if (c.a > 0.0) {
      iv.lo = std::max(iv.lo, c.b / c.a);
    } else if (c.a < 0.0) {
      iv.hi = std::min(iv.hi, c.b / c.a);
    } else if (c.b > 0.0) {
      return {inf, -inf};
    }
  }
  return iv;
}

std::optional<double> scalar_qp(double v_desired, std::span<const ScalarConstraint> constraints) {
  const ScalarInterval iv = scalar_feasible_interval(constraints);
  if (!iv.feasible()) return std::nullopt;
  return std::clamp(v_desired, iv.lo, iv.hi);
}

UnicycleCommand safe_unicycle_velocity(const UnicyclePose& pose, const Vec2& g,
                                       const BarrierFamily& fam, const CorridorParams& params,
                                       double kappa_w) {
  params.validate();
  const Vec x = pose.position;
  const Vec goal = g;
  const Vec2 o = heading_vector(pose.heading);

  std::vector<ScalarConstraint> constraints;
  constraints.reserve(2 * fam.size());
  for (std::size_t i = 0; i < fam.size(); ++i) {
    const BarrierEval e = fam[i].evaluate(x, true);
    const double scale = std::max(1.0, params.kappa * e.gradient.norm());
    if (e.value < -kPreconditionTol) {
      throw PreconditionViolated("unsafe position: h_" + std::to_string(i + 1) + " = " +
                                 std::to_string(e.value));
    }
    const GoalBarrierEval gb =
        goal_barrier_eval(e, x, goal, params.kappa, params.alpha_rate, params.epsilon);
    if (gb.value < -kPreconditionTol * scale) {
      throw PreconditionViolated("goal outside the epsilon-safer corridor: h_" +
                                 std::to_string(i + 1) + ",g = " + std::to_string(gb.value));
    }
    // Values inside the tolerance band count as zero, which keeps v = 0 feasible.
    constraints.push_back({e.gradient.dot(o), -params.alpha_rate * std::max(e.value, 0.0)});
    constraints.push_back({gb.gradient.dot(Vec(o)), -params.alpha_rate * std::max(gb.value, 0.0)});
  }

  const double v_desired = -params.kappa * o.dot(pose.position - g);
  const std::optional<double> v = scalar_qp(v_desired, constraints);
  if (!v) throw std::logic_error("safe unicycle velocity infeasible although v = 0 is feasible");

  UnicycleCommand cmd;
  cmd.v = *v;
  cmd.omega = unicycle_reference_control(pose, g, params.kappa, kappa_w).omega;
  return cmd;
}

OutputRegulationGains output_regulation_gains(const Mat& a, const Mat& b, const Mat& c) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.cols();
  const Eigen::Index p = c.rows();
  if (a.cols() != n || b.rows() != n || c.cols() != n) {
    throw DimensionMismatch("A, B, C shapes are inconsistent");
  }
  if (m != p) throw SingularBlock("[A B; C 0] is not square (inputs != outputs)");

  Mat block = Mat::Zero(n + p, n + m);
  block.topLeftCorner(n, n) = a;
  block.topRightCorner(n, m) = b;
  block.bottomLeftCorner(p, n) = c;
  Mat rhs = Mat::Zero(n + p, p);
  rhs.bottomRows(p) = Mat::Identity(p, p);

  Mat sol;
  try {
    sol = lu_solve(block, rhs);
  } catch (const SingularMatrix& e) {
    throw SingularBlock(std::string("[A B; C 0] is singular: ") + e.what());
  }
  OutputRegulationGains gains{sol.topRows(n), sol.bottomRows(m)};

  const double cx_err = (c * gains.x_map - Mat::Identity(p, p)).cwiseAbs().maxCoeff();
  const double ss_err = (a * gains.x_map + b * gains.u_map).cwiseAbs().maxCoeff();
  if (cx_err > 1e-10 || ss_err > 1e-10) {
    throw SingularBlock("output regulation gains fail CX = I / AX + BU = 0 (ill-conditioned block)");
  }
  return gains;
}

LinearPlant LinearPlant::make(Mat a, Mat b, Mat c, Mat k) {
  LinearPlant plant;
  auto gains = output_regulation_gains(a, b, c);
  plant.a = std::move(a);
  plant.b = std::move(b);
  plant.c = std::move(c);
  plant.k = std::move(k);
  plant.x_map = std::move(gains.x_map);
  plant.u_map = std::move(gains.u_map);
  if (!is_hurwitz(closed_loop_matrix(plant.a, plant.b, plant.k))) {
    throw NotHurwitz("A + B K is not Hurwitz");
  }
  return plant;
}

Vec output_regulation_control(const Vec& x, const Vec& y_star, const LinearPlant& plant) {
  if (x.size() != plant.state_dim() || y_star.size() != plant.output_dim()) {
    throw DimensionMismatch("output regulation: state or output dimension mismatch");
  }
  return plant.k * (x - plant.x_map * y_star) + plant.u_map * y_star;
}

std::optional<Vec2> qp_filter_2d(const Vec2& u_desired, std::span<const PlanarConstraint> constraints) {
  std::vector<const PlanarConstraint*> active;
  active.reserve(constraints.size());
  for (const auto& c : constraints) {
    if (c.a.squaredNorm() == 0.0) {
      if (c.b > 0.0) return std::nullopt;
      continue;
    }
    active.push_back(&c);
  }

  auto feasible = [&](const Vec2& u) {
    return std::all_of(active.begin(), active.end(), [&](const PlanarConstraint* c) {
      return c->a.dot(u) - c->b >= -1e-9 * std::max(1.0, c->a.norm());
    });
  };

  std::optional<Vec2> best;
  double best_cost = std::numeric_limits<double>::infinity();
  auto consider = [&](const Vec2& u) {
    if (!u.allFinite() || !feasible(u)) return;
    const double cost = (u - u_desired).squaredNorm();
    if (cost < best_cost) {
      best_cost = cost;
      best = u;
    }
  };

  consider(u_desired);
  if (best) return best;

  for (const auto* c : active) {
    consider(u_desired + (c->b - c->a.dot(u_desired)) / c->a.squaredNorm() * c->a);
  }
  for (std::size_t i = 0; i < active.size(); ++i) {
    for (std::size_t j = i + 1; j < active.size(); ++j) {
      const Vec2& ai = active[i]->a;
      const Vec2& aj = active[j]->a;
      const double det = ai.x() * aj.y() - ai.y() * aj.x();
      if (std::abs(det) <= 1e-14 * ai.norm() * aj.norm()) continue;
      const double bi = active[i]->b;
      const double bj = active[j]->b;
      consider(Vec2((bi * aj.y() - bj * ai.y()) / det, (ai.x() * bj - aj.x() * bi) / det));
    }
  }
  return best;
}

}  // namespace cbc
