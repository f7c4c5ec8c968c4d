#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>

#include "cbc/barriers.hpp"
#include "cbc/corridor.hpp"
#include "cbc/geom.hpp"

namespace cbc {

class PreconditionViolated : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularBlock : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Wraps an angle to [-pi, pi).
[[nodiscard]] double wrap_angle(double angle);

struct UnicyclePose {
  Vec2 position = Vec2::Zero();
  double heading = 0.0;  // radians, kept in [-pi, pi)
};

/// o(theta) = (cos theta, sin theta)
[[nodiscard]] inline Vec2 heading_vector(double theta) { return {std::cos(theta), std::sin(theta)}; }
/// n(theta) = (-sin theta, cos theta)
[[nodiscard]] inline Vec2 lateral_vector(double theta) { return {-std::sin(theta), std::cos(theta)}; }

struct UnicycleCommand {
  double v = 0.0;
  double omega = 0.0;
};

/// u = -kappa (x - g)
[[nodiscard]] Vec proportional_control(const Vec& x, const Vec& g, double kappa);

/// Goals closer than this leave the alignment angle undefined; the reference
/// control returns (0, 0) there.
inline constexpr double kGoalReachedRadius = 1e-12;

/// v = -kappa_v o^T (x - g),  omega = kappa_w atan2(n^T (g - x), o^T (g - x))
/// with the angle reported in [-pi, pi).
[[nodiscard]] UnicycleCommand unicycle_reference_control(const UnicyclePose& pose, const Vec2& g,
                                                         double kappa_v, double kappa_w);

/// a v >= b
struct ScalarConstraint {
  double a = 0.0;
  double b = 0.0;
};

struct ScalarInterval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  [[nodiscard]] bool feasible() const { return lo <= hi; }
};

/// Feasible interval of a set of scalar constraints. An a = 0 constraint with
/// b > 0 makes the interval empty (lo = +inf, hi = -inf).
[[nodiscard]] ScalarInterval scalar_feasible_interval(std::span<const ScalarConstraint> constraints);

/// argmin (v - v_desired)^2 subject to every a v >= b; nullopt when infeasible.
[[nodiscard]] std::optional<double> scalar_qp(double v_desired,
                                              std::span<const ScalarConstraint> constraints);

/// Relative slack below zero tolerated on the safe-velocity preconditions.
inline constexpr double kPreconditionTol = 1e-6;

/// Safe linear velocity for a unicycle chasing an epsilon-safer goal:
///   minimize (v + kappa o^T (x - g))^2
///   s.t. grad h_i . o v >= -alpha h_i,  grad h_{i,g,eps} . o v >= -alpha h_{i,g,eps}
/// params.kappa is the linear gain kappa_v. omega comes from the reference law.
/// Throws PreconditionViolated when x is unsafe or g is outside BC_full,eps(x).
[[nodiscard]] UnicycleCommand safe_unicycle_velocity(const UnicyclePose& pose, const Vec2& g,
                                                     const BarrierFamily& fam,
                                                     const CorridorParams& params, double kappa_w);

struct OutputRegulationGains {
  Mat x_map;  // X: output to state
  Mat u_map;  // U: output to control
};

/// (X; U) = [A B; C 0]^{-1} (0; I). Throws SingularBlock.
[[nodiscard]] OutputRegulationGains output_regulation_gains(const Mat& a, const Mat& b, const Mat& c);

/// x' = A x + B u, y = C x, with stabilizing K and steady-state maps X, U.
struct LinearPlant {
  Mat a, b, c, k;
  Mat x_map, u_map;

  /// Computes X, U and checks CX = I, AX + BU = 0 (1e-10) and that A + BK is Hurwitz.
  static LinearPlant make(Mat a, Mat b, Mat c, Mat k);

  [[nodiscard]] Mat closed_loop() const { return a + b * k; }
  [[nodiscard]] Eigen::Index state_dim() const { return a.rows(); }
  [[nodiscard]] Eigen::Index control_dim() const { return b.cols(); }
  [[nodiscard]] Eigen::Index output_dim() const { return c.rows(); }
};

/// u = K (x - X y*) + U y*
[[nodiscard]] Vec output_regulation_control(const Vec& x, const Vec& y_star, const LinearPlant& plant);

/// a^T u >= b
struct PlanarConstraint {
  Vec2 a = Vec2::Zero();
  double b = 0.0;
};

/// Exact minimizer of ||u - u_d||^2 over a polygonal feasible set, by
/// enumerating u_d, single-constraint projections and pairwise vertices.
[[nodiscard]] std::optional<Vec2> qp_filter_2d(const Vec2& u_desired,
                                               std::span<const PlanarConstraint> constraints);

}  // namespace cbc
