#include "cbc/path.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cbc {

Path::Path(std::vector<Vec2> waypoints) {
  for (auto& w : waypoints) {
    if (!w.allFinite()) throw std::invalid_argument("path waypoint is not finite");
    if (waypoints_.empty() || (w - waypoints_.back()).norm() > 0.0) waypoints_.push_back(w);
  }
  if (waypoints_.empty()) throw std::invalid_argument("path needs at least one waypoint");
  cumulative_.reserve(waypoints_.size());
  cumulative_.push_back(0.0);
  for (std::size_t i = 1; i < waypoints_.size(); ++i) {
    cumulative_.push_back(cumulative_.back() + (waypoints_[i] - waypoints_[i - 1]).norm());
  }
}

Vec2 Path::at(double s) const {
  if (waypoints_.empty()) throw std::logic_error("evaluating an empty path");
  if (waypoints_.size() == 1) return waypoints_.front();
  s = std::clamp(s, 0.0, 1.0);
  if (s >= 1.0) return waypoints_.back();
  const double target = s * length();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  const auto hi = static_cast<std::size_t>(std::distance(cumulative_.begin(), it));
  const std::size_t seg = std::clamp<std::size_t>(hi, 1, waypoints_.size() - 1);
  const double seg_len = cumulative_[seg] - cumulative_[seg - 1];
  const double t = seg_len > 0.0 ? (target - cumulative_[seg - 1]) / seg_len : 0.0;
  return waypoints_[seg - 1] + std::clamp(t, 0.0, 1.0) * (waypoints_[seg] - waypoints_[seg - 1]);
}

std::size_t default_path_samples(const Path& path, double resolution) {
  if (!(resolution > 0.0)) throw std::invalid_argument("resolution must be > 0");
  const auto by_spacing = static_cast<std::size_t>(std::ceil(path.length() / (0.25 * resolution)));
  return std::max<std::size_t>(100, by_spacing);
}

}  // namespace cbc
