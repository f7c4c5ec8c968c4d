#include "cbc/barriers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cbc {

namespace {

void require_dimension(Eigen::Index expected, const Vec& x) {
  if (x.size() != expected) {
    throw DimensionMismatch("barrier of dimension " + std::to_string(expected) +
                            " evaluated at a point of dimension " + std::to_string(x.size()));
  }
}

Eigen::Index family_dimension(const BarrierFamily& family) {
  if (family.empty()) throw std::invalid_argument("composition of an empty barrier family");
  const Eigen::Index dim = family[0].dimension();
  for (std::size_t i = 1; i < family.size(); ++i) {
    if (family[i].dimension() != dim) throw DimensionMismatch("mixed barrier dimensions");
  }
  return dim;
}

}  // namespace

// --- power distance ---------------------------------------------------------

PowerDistanceBarrier::PowerDistanceBarrier(Vec q, double r, double p)
    : q_(std::move(q)), r_(r), p_(p) {
  if (!(r_ > 0.0) || !std::isfinite(r_)) throw std::invalid_argument("power distance: r must be > 0");
  if (!(p_ > 0.0) || !std::isfinite(p_)) throw std::invalid_argument("power distance: p must be > 0");
  if (!q_.allFinite()) throw std::invalid_argument("power distance: q must be finite");
}

BarrierEval PowerDistanceBarrier::evaluate(const Vec& x, bool with_hessian) const {
  require_dimension(q_.size(), x);
  const Vec d = x - q_;
  const double dist = d.norm();
  const auto n = q_.size();
  BarrierEval out;

  if (dist < kSingularRadius) {
    if (p_ < 2.0) {
      throw SingularBarrierPoint("power distance with p < 2 evaluated at its obstacle point");
    }
    out.value = std::pow(dist, p_) - std::pow(r_, p_);
    out.gradient = Vec::Zero(n);
    if (with_hessian) out.hessian = (p_ == 2.0 ? 2.0 : 0.0) * Mat::Identity(n, n);
    return out;
  }

  const double dist_pm2 = std::pow(dist, p_ - 2.0);
  out.value = std::pow(dist, p_) - std::pow(r_, p_);
  out.gradient = p_ * dist_pm2 * d;
  if (with_hessian) {
    out.hessian = p_ * dist_pm2 *
                  (Mat::Identity(n, n) + (p_ - 2.0) * (d * d.transpose()) / (dist * dist));
  }
  return out;
}

ConvexityTag PowerDistanceBarrier::convexity() const {
  if (p_ < 1.0) return {Convexity::nonconvex, 0.0};
  if (p_ == 1.0) return {Convexity::convex, 0.0};
  if (p_ == 2.0) return {Convexity::strongly_convex, 2.0};
  return {Convexity::strictly_convex, 0.0};
}

// --- affine -----------------------------------------------------------------

AffineBarrier::AffineBarrier(Vec a, double b) : a_(std::move(a)), b_(b) {
  if (!a_.allFinite() || !std::isfinite(b_)) throw std::invalid_argument("affine barrier must be finite");
}

BarrierEval AffineBarrier::evaluate(const Vec& x, bool with_hessian) const {
  require_dimension(a_.size(), x);
  BarrierEval out;
  out.value = a_.dot(x) - b_;
  out.gradient = a_;
  if (with_hessian) out.hessian = Mat::Zero(a_.size(), a_.size());
  return out;
}

// --- family -----------------------------------------------------------------

BarrierFamily::BarrierFamily(std::vector<BarrierPtr> members) : members_(std::move(members)) {
  for (const auto& m : members_) {
    if (!m) throw std::invalid_argument("null barrier in family");
  }
}

void BarrierFamily::add(BarrierPtr member) {
  if (!member) throw std::invalid_argument("null barrier in family");
  members_.push_back(std::move(member));
}

std::vector<double> BarrierFamily::values(const Vec& x) const {
  std::vector<double> out;
  out.reserve(members_.size());
  for (const auto& m : members_) out.push_back(m->value(x));
  return out;
}

double BarrierFamily::min_value(const Vec& x) const {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& m : members_) lo = std::min(lo, m->value(x));
  return lo;
}

bool BarrierFamily::all_convex() const {
  return std::all_of(members_.begin(), members_.end(),
                     [](const BarrierPtr& m) { return m->convexity().is_convex(); });
}

BarrierFamily BarrierFamily::power_distance(const std::vector<Vec2>& points, double r, double p) {
  BarrierFamily fam;
  fam.members_.reserve(points.size());
  for (const auto& q : points) fam.members_.push_back(std::make_shared<PowerDistanceBarrier>(Vec(q), r, p));
  return fam;
}

// --- soft-min ---------------------------------------------------------------

SoftMinBarrier::SoftMinBarrier(BarrierFamily family, double lambda)
    : family_(std::move(family)), lambda_(lambda) {
  family_dimension(family_);
  if (!(lambda_ > 0.0) || !std::isfinite(lambda_)) throw std::invalid_argument("soft-min: lambda must be > 0");
}

Eigen::Index SoftMinBarrier::dimension() const { return family_[0].dimension(); }

BarrierEval SoftMinBarrier::evaluate(const Vec& x, bool with_hessian) const {
  const auto m = family_.size();
  std::vector<BarrierEval> parts;
  parts.reserve(m);
  double h_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    parts.push_back(family_[i].evaluate(x, with_hessian));
    h_min = std::min(h_min, parts.back().value);
  }

  // exp(-lambda (h_i - h_min)) <= 1, so nothing overflows.
  std::vector<double> weights(m);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    weights[i] = std::exp(-lambda_ * (parts[i].value - h_min));
    total += weights[i];
  }
  for (auto& w : weights) w /= total;

  const auto n = x.size();
  BarrierEval out;
  out.value = h_min - std::log(total) / lambda_;
  out.gradient = Vec::Zero(n);
  for (std::size_t i = 0; i < m; ++i) out.gradient += weights[i] * parts[i].gradient;

  if (with_hessian) {
    // sum w_i H_i - lambda (sum w_i g_i g_i^T - g g^T)
    Mat hess = Mat::Zero(n, n);
    Mat outer = Mat::Zero(n, n);
    for (std::size_t i = 0; i < m; ++i) {
      hess += weights[i] * parts[i].hessian;
      outer += weights[i] * parts[i].gradient * parts[i].gradient.transpose();
    }
    out.hessian = hess - lambda_ * (outer - out.gradient * out.gradient.transpose());
  }
  return out;
}

// --- product ----------------------------------------------------------------

ProductBarrier::ProductBarrier(BarrierFamily family) : family_(std::move(family)) {
  family_dimension(family_);
}

Eigen::Index ProductBarrier::dimension() const { return family_[0].dimension(); }

BarrierEval ProductBarrier::evaluate(const Vec& x, bool with_hessian) const {
  const auto m = family_.size();
  const auto n = x.size();
  std::vector<BarrierEval> parts;
  parts.reserve(m);
  bool any_zero = false;
  double value = 1.0;
  for (std::size_t i = 0; i < m; ++i) {
    parts.push_back(family_[i].evaluate(x, with_hessian));
    value *= parts.back().value;
    any_zero = any_zero || parts.back().value == 0.0;
  }

  // prod_{j != i} h_j, and for the Hessian prod_{k != i,j} h_k, without division.
  auto product_except = [&](std::size_t skip_a, std::size_t skip_b) {
    double prod = 1.0;
    for (std::size_t k = 0; k < m; ++k) {
      if (k != skip_a && k != skip_b) prod *= parts[k].value;
    }
    return prod;
  };

  BarrierEval out;
  out.value = value;
  out.gradient = Vec::Zero(n);
  if (!any_zero) {
    for (std::size_t i = 0; i < m; ++i) out.gradient += parts[i].gradient / parts[i].value;
    out.gradient *= value;
  } else {
    for (std::size_t i = 0; i < m; ++i) out.gradient += product_except(i, i) * parts[i].gradient;
  }

  if (with_hessian) {
    Mat hess = Mat::Zero(n, n);
    for (std::size_t i = 0; i < m; ++i) {
      hess += product_except(i, i) * parts[i].hessian;
      for (std::size_t j = 0; j < m; ++j) {
        if (j != i) hess += product_except(i, j) * parts[i].gradient * parts[j].gradient.transpose();
      }
    }
    out.hessian = std::move(hess);
  }
  return out;
}

// --- shift ------------------------------------------------------------------

ShiftedBarrier::ShiftedBarrier(BarrierPtr base, double eps) : base_(std::move(base)), eps_(eps) {
  if (!base_) throw std::invalid_argument("null barrier");
  if (!(eps_ >= 0.0) || !std::isfinite(eps_)) throw std::invalid_argument("epsilon must be >= 0");
}

BarrierEval ShiftedBarrier::evaluate(const Vec& x, bool with_hessian) const {
  BarrierEval out = base_->evaluate(x, with_hessian);
  out.value -= eps_;
  return out;
}

BarrierPtr softmin_compose(const BarrierFamily& family, double lambda) {
  return std::make_shared<SoftMinBarrier>(family, lambda);
}

BarrierPtr product_compose(const BarrierFamily& family) {
  return std::make_shared<ProductBarrier>(family);
}

BarrierFamily shift_epsilon(const BarrierFamily& family, double eps) {
  if (!(eps >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
  std::vector<BarrierPtr> shifted;
  shifted.reserve(family.size());
  for (const auto& m : family.members()) shifted.push_back(std::make_shared<ShiftedBarrier>(m, eps));
  return BarrierFamily(std::move(shifted));
}

// --- goal-control barriers ---------------------------------------------------

GoalBarrierEval goal_barrier_eval(const BarrierEval& base, const Vec& x, const Vec& goal,
                                  double kappa, double alpha_rate, double epsilon) {
  if (goal.size() != x.size()) throw DimensionMismatch("goal and state dimensions differ");
  if (base.hessian.size() == 0) throw std::invalid_argument("goal-control barrier needs the base Hessian");
  const Vec offset = x - goal;
  GoalBarrierEval out;
  out.value = -kappa * base.gradient.dot(offset) + alpha_rate * (base.value - epsilon);
  out.gradient = -kappa * (base.hessian * offset) + (alpha_rate - kappa) * base.gradient;
  return out;
}

GoalBarrierEval goal_barrier_eval(const GoalControlBarrier& gb, const Vec& x) {
  if (!gb.base) throw std::invalid_argument("goal-control barrier without a base barrier");
  return goal_barrier_eval(gb.base->evaluate(x, true), x, gb.goal, gb.kappa, gb.alpha_rate,
                           gb.epsilon);
}

}  // namespace cbc
