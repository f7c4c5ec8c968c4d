#pragma once

#include <cstddef>
#include <vector>

#include "cbc/geom.hpp"

namespace cbc {

/// Piecewise-linear reference path p(s), s in [0, 1], parameterized by
/// normalized arc length. Consecutive duplicate waypoints are dropped.
class Path {
 public:
  Path() = default;
  explicit Path(std::vector<Vec2> waypoints);

  /// p(s); s is clamped to [0, 1].
  [[nodiscard]] Vec2 at(double s) const;
  [[nodiscard]] double length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
  [[nodiscard]] bool empty() const { return waypoints_.empty(); }
  [[nodiscard]] const std::vector<Vec2>& waypoints() const { return waypoints_; }
  [[nodiscard]] const std::vector<double>& cumulative_length() const { return cumulative_; }
  [[nodiscard]] const Vec2& front() const { return waypoints_.front(); }
  [[nodiscard]] const Vec2& back() const { return waypoints_.back(); }

 private:
  std::vector<Vec2> waypoints_;
  std::vector<double> cumulative_;
};

/// max(100, ceil(length / (0.25 * resolution)))
[[nodiscard]] std::size_t default_path_samples(const Path& path, double resolution);

}  // namespace cbc
