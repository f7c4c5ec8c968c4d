#include "cbc/geom.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace cbc {

double Halfspace::slack(const Vec& g) const {
  if (g.size() != normal.size()) {
    throw DimensionMismatch("halfspace has dimension " + std::to_string(normal.size()) +
                            ", point has " + std::to_string(g.size()));
  }
  return normal.dot(g) - offset;
}

bool Halfspace::contains(const Vec& g, double tol) const {
  const double scale = std::max(1.0, normal.norm());
  return slack(g) / scale >= -tol;
}

const char* to_string(CorridorKind kind) {
  switch (kind) {
    case CorridorKind::full: return "full";
    case CorridorKind::full_eps: return "full_eps";
    case CorridorKind::uni: return "uni";
    case CorridorKind::lor: return "lor";
  }
  return "?";
}

bool corridor_contains(const Corridor& c, const Vec& g, double tol) {
  if (g.size() != c.dimension()) {
    throw DimensionMismatch("corridor has dimension " + std::to_string(c.dimension()) +
                            ", point has " + std::to_string(g.size()));
  }
  if (tol < 0.0) throw std::invalid_argument("membership tolerance must be >= 0");
  return std::all_of(c.halfspaces.begin(), c.halfspaces.end(),
                     [&](const Halfspace& hs) { return hs.contains(g, tol); });
}

Box Box::centered(const Vec& center, double half_width) {
  return {center.array() - half_width, center.array() + half_width};
}

bool Box::degenerate() const {
  return lo.size() != hi.size() || lo.size() == 0 || ((hi - lo).array() <= 0.0).any();
}

Polygon clip_polygon(const Polygon& poly, const Halfspace& hs) {
  if (hs.normal.size() != 2) throw DimensionMismatch("polygon clipping needs a 2D halfspace");
  if (hs.degenerate()) return hs.offset > 0.0 ? Polygon{} : poly;

  Polygon out;
  out.reserve(poly.size() + 1);
  const auto n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& cur = poly[i];
    const Vec2& next = poly[(i + 1) % n];
    const double s_cur = hs.normal.dot(cur) - hs.offset;
    const double s_next = hs.normal.dot(next) - hs.offset;
    if (s_cur >= 0.0) out.push_back(cur);
    if ((s_cur >= 0.0) != (s_next >= 0.0)) {
      const double t = s_cur / (s_cur - s_next);
      out.push_back(cur + t * (next - cur));
    }
  }

  // Collapse coincident neighbours left by vertices lying on the cut line.
  Polygon dedup;
  dedup.reserve(out.size());
  for (const auto& v : out) {
    if (dedup.empty() || (v - dedup.back()).norm() > 1e-12) dedup.push_back(v);
  }
  while (dedup.size() > 1 && (dedup.front() - dedup.back()).norm() <= 1e-12) dedup.pop_back();
  if (dedup.size() < 3) return {};
  return dedup;
}

Polygon clip_corridor_2d(const Corridor& c, const Box& bbox) {
  if (c.dimension() != 2 || bbox.dimension() != 2) {
    throw DimensionMismatch("clip_corridor_2d needs a 2D corridor and box");
  }
  if (bbox.degenerate()) throw std::invalid_argument("clipping box is degenerate");
  if (c.empty) return {};

  Polygon poly{{bbox.lo.x(), bbox.lo.y()},
               {bbox.hi.x(), bbox.lo.y()},
               {bbox.hi.x(), bbox.hi.y()},
               {bbox.lo.x(), bbox.hi.y()}};
  for (const auto& hs : c.halfspaces) {
    poly = clip_polygon(poly, hs);
    if (poly.empty()) break;
  }
  return poly;
}

double polygon_area(const Polygon& poly) {
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    twice += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * twice;
}

Vec2 polygon_centroid(const Polygon& poly) {
  if (poly.empty()) throw std::invalid_argument("centroid of an empty polygon");
  const double area = polygon_area(poly);
  if (std::abs(area) < 1e-300) {
    Vec2 mean = Vec2::Zero();
    for (const auto& v : poly) mean += v;
    return mean / static_cast<double>(poly.size());
  }
  Vec2 acc = Vec2::Zero();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    const double cross = a.x() * b.y() - b.x() * a.y();
    acc += (a + b) * cross;
  }
  return acc / (6.0 * area);
}

std::vector<Vec> sample_corridor(const Corridor& c, const Box& bbox, std::size_t count,
                                 std::uint64_t seed) {
  if (bbox.dimension() != c.dimension()) {
    throw DimensionMismatch("sampling box and corridor dimensions differ");
  }
  if (bbox.degenerate()) throw std::invalid_argument("sampling box is degenerate");

  std::vector<Vec> out;
  if (count == 0) return out;
  if (c.empty) throw SamplingFailure("corridor is empty (infeasible zero-normal constraint)");

  out.reserve(count);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Vec span = bbox.hi - bbox.lo;
  std::size_t trials = 0;
  Vec g(c.dimension());
  while (out.size() < count) {
    for (Eigen::Index k = 0; k < g.size(); ++k) g[k] = bbox.lo[k] + span[k] * unit(rng);
    ++trials;
    if (corridor_contains(c, g, 0.0)) out.push_back(g);
    if (out.empty() && trials >= kSamplingTrialCap) {
      throw SamplingFailure("no corridor member found in " + std::to_string(trials) +
                            " trials");
    }
  }
  return out;
}

void write_polygons(std::ostream& os, std::span<const Polygon> polygons) {
  const auto old_flags = os.flags();
  const auto old_precision = os.precision();
  os << std::setprecision(9);
  bool first = true;
  for (const auto& poly : polygons) {
    if (!first) os << '\n';
    first = false;
    for (const auto& v : poly) os << v.x() << ' ' << v.y() << '\n';
  }
  os.flags(old_flags);
  os.precision(old_precision);
}

std::vector<Polygon> read_polygons(std::istream& is) {
  std::vector<Polygon> polygons;
  Polygon current;
  bool in_polygon = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      polygons.push_back(std::move(current));
      current.clear();
      in_polygon = false;
      continue;
    }
    std::istringstream ls(line);
    double x = 0.0;
    double y = 0.0;
    std::string extra;
    if (!(ls >> x >> y) || (ls >> extra)) {
      throw std::runtime_error("polygon dump line " + std::to_string(line_no) +
                               ": expected \"x y\"");
    }
    current.emplace_back(x, y);
    in_polygon = true;
  }
  if (in_polygon) polygons.push_back(std::move(current));
  return polygons;
}

Mat lu_solve(const Mat& a, const Mat& b) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.rows() != n) throw DimensionMismatch("lu_solve: shape mismatch");
  Mat lu = a;
  Mat rhs = b;
  const double scale = a.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) throw SingularMatrix("lu_solve: zero matrix");

  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index pivot = k;
    for (Eigen::Index i = k + 1; i < n; ++i) {
      if (std::abs(lu(i, k)) > std::abs(lu(pivot, k))) pivot = i;
    }
    if (std::abs(lu(pivot, k)) < 1e-12 * scale) {
      throw SingularMatrix("lu_solve: relative pivot below 1e-12 at column " +
                           std::to_string(k));
    }
    if (pivot != k) {
      lu.row(k).swap(lu.row(pivot));
      rhs.row(k).swap(rhs.row(pivot));
    }
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double factor = lu(i, k) / lu(k, k);
      lu(i, k) = factor;
      lu.row(i).tail(n - k - 1) -= factor * lu.row(k).tail(n - k - 1);
      rhs.row(i) -= factor * rhs.row(k);
    }
  }
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    rhs.row(k) -= lu.row(k).tail(n - k - 1) * rhs.bottomRows(n - k - 1);
    rhs.row(k) /= lu(k, k);
  }
  return rhs;
}

}  // namespace cbc
