#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cbc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;

/// Default absolute membership tolerance, applied after dividing a constraint
/// by max(1, ||normal||).
inline constexpr double kMembershipTol = 1e-9;

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SingularMatrix : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SamplingFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The closed halfspace { g : normal . g >= offset }. The normal is stored as
/// built (not normalized) so logged constraints keep their raw coefficients.
struct Halfspace {
  Vec normal;
  double offset = 0.0;

  /// normal . g - offset
  [[nodiscard]] double slack(const Vec& g) const;
  [[nodiscard]] bool contains(const Vec& g, double tol = kMembershipTol) const;

  /// Zero normal: the constraint is either vacuous (offset <= 0) or
  /// unsatisfiable (offset > 0).
  [[nodiscard]] bool degenerate() const { return normal.squaredNorm() == 0.0; }
  [[nodiscard]] bool infeasible() const { return degenerate() && offset > 0.0; }
};

enum class CorridorKind { full, full_eps, uni, lor };

const char* to_string(CorridorKind kind);

/// Intersection of halfspaces in goal space, built around a robot state.
struct Corridor {
  Vec anchor;
  std::vector<Halfspace> halfspaces;
  CorridorKind kind = CorridorKind::full;
  /// Set when some halfspace has a zero normal and a positive offset.
  bool empty = false;
  /// Set when built on request from a state with some h_i < 0.
  bool unsafe_anchor = false;

  [[nodiscard]] Eigen::Index dimension() const { return anchor.size(); }
};

/// true iff every halfspace holds to within tol (scaled by max(1, ||normal||)).
/// An empty halfspace list is the whole space.
[[nodiscard]] bool corridor_contains(const Corridor& c, const Vec& g,
                                     double tol = kMembershipTol);

/// Axis-aligned box [lo, hi] in any dimension.
struct Box {
  Vec lo;
  Vec hi;

  static Box centered(const Vec& center, double half_width);
  [[nodiscard]] Eigen::Index dimension() const { return lo.size(); }
  [[nodiscard]] bool degenerate() const;
};

/// Convex polygon, counterclockwise. Empty when the clipped region is empty.
using Polygon = std::vector<Vec2>;

/// Sutherland-Hodgman step: the part of a convex polygon inside one halfspace.
[[nodiscard]] Polygon clip_polygon(const Polygon& poly, const Halfspace& hs);

/// bbox intersected with every halfspace of a 2D corridor.
[[nodiscard]] Polygon clip_corridor_2d(const Corridor& c, const Box& bbox);

[[nodiscard]] Vec2 polygon_centroid(const Polygon& poly);
[[nodiscard]] double polygon_area(const Polygon& poly);

/// Trials without a single acceptance before sample_corridor gives up.
inline constexpr std::size_t kSamplingTrialCap = 100000;

/// Rejection-samples `count` corridor members uniformly from bbox.
/// Deterministic for a fixed seed. Throws SamplingFailure when the first
/// kSamplingTrialCap trials accept nothing.
[[nodiscard]] std::vector<Vec> sample_corridor(const Corridor& c, const Box& bbox,
                                               std::size_t count, std::uint64_t seed);

/// "x y" per vertex (9 significant digits), blank line between polygons.
void write_polygons(std::ostream& os, std::span<const Polygon> polygons);
[[nodiscard]] std::vector<Polygon> read_polygons(std::istream& is);

/// Solves A X = B by LU with partial pivoting. Throws SingularMatrix when a
/// pivot falls below 1e-12 relative to the largest entry of A.
[[nodiscard]] Mat lu_solve(const Mat& a, const Mat& b);

}  // namespace cbc
