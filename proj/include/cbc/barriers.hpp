#pragma once

#include <memory>
#include <stdexcept>
#include <vector>

#include "cbc/geom.hpp"

namespace cbc {

class SingularBarrierPoint : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class Convexity { convex, strictly_convex, strongly_convex, nonconvex };

/// Convexity class of a barrier; `mu` is meaningful only for strongly_convex.
struct ConvexityTag {
  Convexity kind = Convexity::nonconvex;
  double mu = 0.0;

  [[nodiscard]] bool is_convex() const { return kind != Convexity::nonconvex; }
  bool operator==(const ConvexityTag&) const = default;
};

struct BarrierEval {
  double value = 0.0;
  Vec gradient;
  Mat hessian;  // left empty when not requested
};

/// A scalar safety function h with analytic gradient and Hessian.
class Barrier {
 public:
  virtual ~Barrier() = default;

  [[nodiscard]] virtual Eigen::Index dimension() const = 0;
  [[nodiscard]] virtual BarrierEval evaluate(const Vec& x, bool with_hessian = true) const = 0;
  [[nodiscard]] virtual ConvexityTag convexity() const = 0;

  [[nodiscard]] double value(const Vec& x) const { return evaluate(x, false).value; }
  [[nodiscard]] Vec gradient(const Vec& x) const { return evaluate(x, false).gradient; }
  [[nodiscard]] Mat hessian(const Vec& x) const { return evaluate(x, true).hessian; }
};

using BarrierPtr = std::shared_ptr<const Barrier>;

/// h(x) = ||x - q||^p - r^p
class PowerDistanceBarrier final : public Barrier {
 public:
  /// Distances below this are treated as x == q.
  static constexpr double kSingularRadius = 1e-12;

  PowerDistanceBarrier(Vec q, double r, double p);

  [[nodiscard]] Eigen::Index dimension() const override { return q_.size(); }
  [[nodiscard]] BarrierEval evaluate(const Vec& x, bool with_hessian = true) const override;
  [[nodiscard]] ConvexityTag convexity() const override;

  [[nodiscard]] const Vec& q() const { return q_; }
  [[nodiscard]] double r() const { return r_; }
  [[nodiscard]] double p() const { return p_; }

 private:
  Vec q_;
  double r_;
  double p_;
};

/// h(x) = a . x - b. Convex (affine); used for linear-system demos.
class AffineBarrier final : public Barrier {
 public:
  AffineBarrier(Vec a, double b);

  [[nodiscard]] Eigen::Index dimension() const override { return a_.size(); }
  [[nodiscard]] BarrierEval evaluate(const Vec& x, bool with_hessian = true) const override;
  [[nodiscard]] ConvexityTag convexity() const override { return {Convexity::convex, 0.0}; }

 private:
  Vec a_;
  double b_;
};

/// A set of barriers h_1..h_m evaluated jointly. Empty families are legal
/// and mean "no obstacles".
class BarrierFamily {
 public:
  BarrierFamily() = default;
  explicit BarrierFamily(std::vector<BarrierPtr> members);

  void add(BarrierPtr member);

  [[nodiscard]] std::size_t size() const { return members_.size(); }
  [[nodiscard]] bool empty() const { return members_.empty(); }
  [[nodiscard]] const Barrier& operator[](std::size_t i) const { return *members_[i]; }
  [[nodiscard]] const std::vector<BarrierPtr>& members() const { return members_; }

  [[nodiscard]] std::vector<double> values(const Vec& x) const;
  /// min_i h_i(x); +infinity for an empty family.
  [[nodiscard]] double min_value(const Vec& x) const;
  [[nodiscard]] bool all_convex() const;

  /// Family of point obstacles sharing one margin and power.
  static BarrierFamily power_distance(const std::vector<Vec2>& points, double r, double p);

 private:
  std::vector<BarrierPtr> members_;
};

/// -(1/lambda) log sum exp(-lambda h_i), evaluated with a max shift.
class SoftMinBarrier final : public Barrier {
 public:
  SoftMinBarrier(BarrierFamily family, double lambda);

  [[nodiscard]] Eigen::Index dimension() const override;
  [[nodiscard]] BarrierEval evaluate(const Vec& x, bool with_hessian = true) const override;
  [[nodiscard]] ConvexityTag convexity() const override { return {}; }

 private:
  BarrierFamily family_;
  double lambda_;
};

/// prod_i h_i
class ProductBarrier final : public Barrier {
 public:
  explicit ProductBarrier(BarrierFamily family);

  [[nodiscard]] Eigen::Index dimension() const override;
  [[nodiscard]] BarrierEval evaluate(const Vec& x, bool with_hessian = true) const override;
  [[nodiscard]] ConvexityTag convexity() const override { return {}; }

 private:
  BarrierFamily family_;
};

/// h(x) - eps; same derivatives and convexity as the base.
class ShiftedBarrier final : public Barrier {
 public:
  ShiftedBarrier(BarrierPtr base, double eps);

  [[nodiscard]] Eigen::Index dimension() const override { return base_->dimension(); }
  [[nodiscard]] BarrierEval evaluate(const Vec& x, bool with_hessian = true) const override;
  [[nodiscard]] ConvexityTag convexity() const override { return base_->convexity(); }

 private:
  BarrierPtr base_;
  double eps_;
};

[[nodiscard]] BarrierPtr softmin_compose(const BarrierFamily& family, double lambda);
[[nodiscard]] BarrierPtr product_compose(const BarrierFamily& family);
[[nodiscard]] BarrierFamily shift_epsilon(const BarrierFamily& family, double eps);

/// The corridor constraint of one barrier, read as a barrier in x:
///   h_g(x) = -kappa grad h(x)^T (x - g) + alpha (h(x) - eps)
struct GoalControlBarrier {
  BarrierPtr base;
  Vec goal;
  double kappa = 1.0;
  double alpha_rate = 1.0;
  double epsilon = 0.0;
};

struct GoalBarrierEval {
  double value = 0.0;
  Vec gradient;
};

/// value and gradient  -kappa hess h (x - g) + (alpha - kappa) grad h
[[nodiscard]] GoalBarrierEval goal_barrier_eval(const GoalControlBarrier& gb, const Vec& x);

/// Same, from an already computed base evaluation (must carry the Hessian).
[[nodiscard]] GoalBarrierEval goal_barrier_eval(const BarrierEval& base, const Vec& x,
                                                const Vec& goal, double kappa, double alpha_rate,
                                                double epsilon);

}  // namespace cbc
