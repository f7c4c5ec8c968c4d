#include "cbc/corridor.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace cbc {

UnsafeAnchor::UnsafeAnchor(std::size_t barrier_index, double barrier_value)
    : std::runtime_error("corridor anchor is unsafe: h_" + std::to_string(barrier_index + 1) +
                         " = " + std::to_string(barrier_value)),
      barrier(barrier_index),
      value(barrier_value) {}

void CorridorParams::validate() const {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw std::invalid_argument("kappa must be > 0");
  if (!(alpha_rate > 0.0) || !std::isfinite(alpha_rate)) {
    throw std::invalid_argument("alpha must be > 0");
  }
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("epsilon must be >= 0");
}

namespace {

// Shared tail of every construction: flag unsafe anchors and empty corridors.
void finish(Corridor& c, const std::vector<double>& h, AnchorCheck check) {
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h[i] < 0.0) {
      if (check == AnchorCheck::strict) throw UnsafeAnchor(i, h[i]);
      c.unsafe_anchor = true;
    }
  }
  for (const auto& hs : c.halfspaces) {
    if (hs.infeasible()) c.empty = true;
  }
}

}  // namespace

Corridor bc_full(const BarrierFamily& fam, const Vec& x, const CorridorParams& params,
                 AnchorCheck check) {
  params.validate();
  Corridor c;
  c.anchor = x;
  c.kind = params.epsilon > 0.0 ? CorridorKind::full_eps : CorridorKind::full;
  c.halfspaces.reserve(fam.size());
  std::vector<double> h;
  h.reserve(fam.size());
  for (const auto& member : fam.members()) {
    const BarrierEval e = member->evaluate(x, false);
    h.push_back(e.value);
    Halfspace hs;
    hs.normal = params.kappa * e.gradient;
    hs.offset = hs.normal.dot(x) - params.alpha_rate * (e.value - params.epsilon);
    c.halfspaces.push_back(std::move(hs));
  }
  finish(c, h, check);
  return c;
}

Corridor bc_uni(const BarrierFamily& fam, const Vec2& x, double theta, const CorridorParams& params,
                AnchorCheck check) {
  params.validate();
  const Vec2 heading(std::cos(theta), std::sin(theta));
  const Vec xv = x;
  Corridor c;
  c.anchor = xv;
  c.kind = CorridorKind::uni;
  c.halfspaces.reserve(fam.size());
  std::vector<double> h;
  h.reserve(fam.size());
  for (const auto& member : fam.members()) {
    const BarrierEval e = member->evaluate(xv, false);
    h.push_back(e.value);
    // -kappa (grad h . o) o^T (x - g) >= -alpha (h - eps)
    const double along = e.gradient.dot(heading);
    Halfspace hs;
    hs.normal = Vec(params.kappa * along * heading);
    hs.offset = hs.normal.dot(xv) - params.alpha_rate * (e.value - params.epsilon);
    c.halfspaces.push_back(std::move(hs));
  }
  finish(c, h, check);
  return c;
}

Mat closed_loop_matrix(const Mat& a, const Mat& b, const Mat& k) {
  if (a.rows() != a.cols() || b.rows() != a.rows() || k.rows() != b.cols() || k.cols() != a.cols()) {
    throw DimensionMismatch("A, B, K shapes are inconsistent");
  }
  return a + b * k;
}

bool is_hurwitz(const Mat& m) {
  if (m.rows() != m.cols() || m.rows() == 0) throw DimensionMismatch("Hurwitz test needs a square matrix");
  Eigen::EigenSolver<Mat> solver(m, false);
  if (solver.info() != Eigen::Success) return false;
  return (solver.eigenvalues().real().array() < 0.0).all();
}

Corridor bc_lor(const BarrierFamily& fam, const Vec& x, const Mat& a, const Mat& b, const Mat& c_out,
                const Mat& k, const Mat& x_map, const CorridorParams& params, AnchorCheck check) {
  params.validate();
  const Mat l = closed_loop_matrix(a, b, k);
  if (!is_hurwitz(l)) throw NotHurwitz("A + B K is not Hurwitz");
  if (x.size() != a.rows() || c_out.cols() != a.rows() || x_map.rows() != a.rows() ||
      x_map.cols() != c_out.rows()) {
    throw DimensionMismatch("bc_lor: state, C or X shape mismatch");
  }

  Corridor c;
  c.anchor = c_out * x;
  c.kind = CorridorKind::lor;
  c.halfspaces.reserve(fam.size());
  std::vector<double> h;
  h.reserve(fam.size());
  const Mat lx = l * x_map;
  const Vec l_state = l * x;
  for (const auto& member : fam.members()) {
    const BarrierEval e = member->evaluate(x, false);
    h.push_back(e.value);
    Halfspace hs;
    hs.normal = -(lx.transpose() * e.gradient);
    hs.offset = -e.gradient.dot(l_state) - params.alpha_rate * e.value;
    c.halfspaces.push_back(std::move(hs));
  }
  finish(c, h, check);
  return c;
}

bool trust_region_contains(const BarrierFamily& fam, const Vec& x, const Mat& a, const Mat& b,
                           const Mat& k, const Mat& x_map, double alpha_rate, const Vec& y_star) {
  const Mat l = closed_loop_matrix(a, b, k);
  if (!is_hurwitz(l)) throw NotHurwitz("A + B K is not Hurwitz");
  if (x_map.rows() != x.size() || x_map.cols() != y_star.size()) {
    throw DimensionMismatch("trust region: X, x, y* shape mismatch");
  }
  const double l_norm = spectral_norm(l);
  const double gap = (x - x_map * y_star).norm();
  for (const auto& member : fam.members()) {
    const BarrierEval e = member->evaluate(x, false);
    if (e.gradient.norm() * l_norm * gap > alpha_rate * e.value) return false;
  }
  return true;
}

double spectral_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  if (!m.allFinite()) throw std::invalid_argument("spectral_norm of a non-finite matrix");
  const Mat gram = m.transpose() * m;
  const Eigen::Index n = gram.rows();

  // Deterministic start with distinct entries so it is unlikely to be
  // orthogonal to the dominant eigenvector.
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = 1.0 + 1.0 / static_cast<double>(i + 2);
  v.normalize();

  double lambda = 0.0;
  for (int iter = 0; iter < 100000; ++iter) {
    Vec w = gram * v;
    const double norm = w.norm();
    if (norm == 0.0) {
      // v landed in the null space; the start vector was unlucky or M = 0.
      if (gram.cwiseAbs().maxCoeff() == 0.0) return 0.0;
      v = Vec::Unit(n, iter % n);
      continue;
    }
    const double next = v.dot(w);
    v = w / norm;
    if (iter > 0 && std::abs(next - lambda) <= 1e-12 * std::abs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

std::vector<double> corridor_slacks(const Corridor& c, const Vec& g) {
  std::vector<double> out;
  out.reserve(c.halfspaces.size());
  for (const auto& hs : c.halfspaces) out.push_back(hs.slack(g));
  return out;
}

}  // namespace cbc
