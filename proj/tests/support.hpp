#pragma once

// Random generators and brute-force oracles shared by the unit tests. The
// oracles deliberately avoid the library code they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "cbc/barriers.hpp"
#include "cbc/geom.hpp"
#include "cbc/world.hpp"

namespace cbc::test {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
  Vec2 point(double lo, double hi) { return {uniform(lo, hi), uniform(lo, hi)}; }
  Vec vec(Eigen::Index n, double lo, double hi) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = uniform(lo, hi);
    return v;
  }
  Vec2 unit() {
    const double a = uniform(-M_PI, M_PI);
    return {std::cos(a), std::sin(a)};
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Point obstacles around a robot at `x`, each at least r + gap away.
struct Scene {
  Vec2 x;
  std::vector<Vec2> obstacles;
  double r = 0.2;
  double p = 1.0;

  [[nodiscard]] BarrierFamily family() const { return BarrierFamily::power_distance(obstacles, r, p); }
};

inline Scene random_scene(Rng& rng, int max_obstacles, double p, double gap = 0.05) {
  Scene s;
  s.x = rng.point(-1.0, 1.0);
  s.r = rng.uniform(0.1, 0.5);
  s.p = p;
  const int m = rng.integer(1, max_obstacles);
  while (static_cast<int>(s.obstacles.size()) < m) {
    const Vec2 q = rng.point(-3.0, 3.0);
    if ((q - s.x).norm() > s.r + gap) s.obstacles.push_back(q);
  }
  return s;
}

/// min_i ||g - q_i||^p - r^p straight from the definition.
inline double true_min_power(const std::vector<Vec2>& obstacles, double r, double p, const Vec2& g) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : obstacles) best = std::min(best, std::pow((g - q).norm(), p) - std::pow(r, p));
  return best;
}

/// Central differences, step h.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-5) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h = 1e-5) {
  const Vec f0 = f(x);
  Mat j(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec a = x, b = x;
    a[i] += h;
    b[i] -= h;
    j.col(i) = (f(a) - f(b)) / (2.0 * h);
  }
  return j;
}

/// ||a - b|| / max(1, ||b||)
inline double rel_err(const Mat& a, const Mat& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

/// All-pairs distance between cell centres (metres), kNoObstacleDistance when
/// nothing counts as an obstacle.
inline std::vector<double> brute_force_edt(const OccupancyGrid& g, bool unknown_is_obstacle) {
  std::vector<CellIndex> obstacles;
  for (int iy = 0; iy < g.height(); ++iy) {
    for (int ix = 0; ix < g.width(); ++ix) {
      const auto s = g.at(ix, iy);
      if (s == CellState::occupied || (unknown_is_obstacle && s == CellState::unknown)) {
        obstacles.push_back({ix, iy});
      }
    }
  }
  std::vector<double> out(g.size(), kNoObstacleDistance);
  for (int iy = 0; iy < g.height(); ++iy) {
    for (int ix = 0; ix < g.width(); ++ix) {
      double best = kNoObstacleDistance;
      for (const auto& o : obstacles) {
        best = std::min(best, g.resolution() * std::hypot(ix - o.ix, iy - o.iy));
      }
      out[g.index(ix, iy)] = best;
    }
  }
  return out;
}

/// Exact distance from p to the union of occupied squares.
inline double distance_to_occupied_squares(const OccupancyGrid& g, const Vec2& p) {
  double best = std::numeric_limits<double>::infinity();
  for (int iy = 0; iy < g.height(); ++iy) {
    for (int ix = 0; ix < g.width(); ++ix) {
      if (g.at(ix, iy) != CellState::occupied) continue;
      const Vec2 lo = g.origin() + g.resolution() * Vec2(ix, iy);
      const Vec2 hi = lo + Vec2::Constant(g.resolution());
      const Vec2 c = p.cwiseMax(lo).cwiseMin(hi);
      best = std::min(best, (p - c).norm());
    }
  }
  return best;
}

/// Rough grid of a 2D world from rows written top first.
inline OccupancyGrid grid_from_rows(const std::vector<std::string>& rows, double res = 1.0,
                                    Vec2 origin = Vec2::Zero()) {
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(rows.front().size());
  OccupancyGrid g(w, h, res, origin, CellState::free);
  for (int r = 0; r < h; ++r) {
    for (int ix = 0; ix < w; ++ix) {
      const char ch = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(ix)];
      const int iy = h - 1 - r;
      g.set(ix, iy, ch == '#' ? CellState::occupied : ch == '?' ? CellState::unknown : CellState::free);
    }
  }
  return g;
}

}  // namespace cbc::test
