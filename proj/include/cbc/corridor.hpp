#pragma once

#include <stdexcept>

#include "cbc/barriers.hpp"
#include "cbc/geom.hpp"

namespace cbc {

class UnsafeAnchor : public std::runtime_error {
 public:
  UnsafeAnchor(std::size_t barrier, double value);
  std::size_t barrier;
  double value;
};

class NotHurwitz : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// kappa: proportional (or linear-velocity) gain, 1/s. alpha_rate: linear
/// barrier decay rate, 1/s. epsilon: extra margin subtracted from every h_i.
struct CorridorParams {
  double kappa = 1.0;
  double alpha_rate = 1.0;
  double epsilon = 0.0;

  void validate() const;
};

enum class AnchorCheck { strict, allow_unsafe };

/// Fully actuated system under u = -kappa (x - g). One halfspace per barrier:
///   kappa grad h_i(x) . g >= kappa grad h_i(x) . x - alpha (h_i(x) - eps)
/// Kind is full_eps when params.epsilon > 0.
[[nodiscard]] Corridor bc_full(const BarrierFamily& fam, const Vec& x, const CorridorParams& params,
                               AnchorCheck check = AnchorCheck::strict);

/// Unicycle at heading theta under v = -kappa_v o^T (x - g), with
/// o = (cos theta, sin theta). params.kappa plays the role of kappa_v.
[[nodiscard]] Corridor bc_uni(const BarrierFamily& fam, const Vec2& x, double theta,
                              const CorridorParams& params,
                              AnchorCheck check = AnchorCheck::strict);

/// Closed-loop matrix of an output regulator, A + B K.
[[nodiscard]] Mat closed_loop_matrix(const Mat& a, const Mat& b, const Mat& k);

/// true iff every eigenvalue has a negative real part.
[[nodiscard]] bool is_hurwitz(const Mat& m);

/// Linear system under u = K (x - X y*) + U y*. Halfspaces live in y*-space:
///   -(grad h_i^T L X) y* >= -grad h_i^T L x - alpha h_i,   L = A + B K.
/// The anchor is C x. The corridor may be empty and need not contain C x.
[[nodiscard]] Corridor bc_lor(const BarrierFamily& fam, const Vec& x, const Mat& a, const Mat& b,
                              const Mat& c, const Mat& k, const Mat& x_map,
                              const CorridorParams& params,
                              AnchorCheck check = AnchorCheck::strict);

/// ||grad h_i(x)|| ||A + B K|| ||x - X y*|| <= alpha h_i(x) for every i.
[[nodiscard]] bool trust_region_contains(const BarrierFamily& fam, const Vec& x, const Mat& a,
                                         const Mat& b, const Mat& k, const Mat& x_map,
                                         double alpha_rate, const Vec& y_star);

/// Largest singular value by power iteration on M^T M (relative tol 1e-12).
[[nodiscard]] double spectral_norm(const Mat& m);

/// Per-halfspace slack normal . g - offset; for the goal-control corridors this
/// is exactly the goal-control barrier value h_{i,g}.
[[nodiscard]] std::vector<double> corridor_slacks(const Corridor& c, const Vec& g);

}  // namespace cbc
