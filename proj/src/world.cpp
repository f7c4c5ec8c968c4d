#include "cbc/world.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <queue>
#include <sstream>
#include <tuple>

namespace cbc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

char cell_char(CellState s) {
  switch (s) {
    case CellState::free: return '.';
    case CellState::occupied: return '#';
    case CellState::unknown: return '?';
  }
  return '?';
}

}  // namespace

OccupancyGrid::OccupancyGrid(int width, int height, double resolution, Vec2 origin, CellState fill)
    : width_(width), height_(height), resolution_(resolution), origin_(std::move(origin)) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("grid dimensions must be positive");
  if (!(resolution > 0.0) || !std::isfinite(resolution)) {
    throw std::invalid_argument("grid resolution must be > 0");
  }
  if (!origin_.allFinite()) throw std::invalid_argument("grid origin must be finite");
  cells_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

CellIndex OccupancyGrid::cell(std::size_t linear) const {
  const auto w = static_cast<std::size_t>(width_);
  return {static_cast<int>(linear % w), static_cast<int>(linear / w)};
}

Vec2 OccupancyGrid::cell_center(const CellIndex& c) const {
  return origin_ + resolution_ * Vec2(c.ix + 0.5, c.iy + 0.5);
}

std::optional<CellIndex> OccupancyGrid::cell_of(const Vec2& p) const {
  const Vec2 u = (p - origin_) / resolution_;
  if (!u.allFinite()) return std::nullopt;
  const double fx = std::floor(u.x());
  const double fy = std::floor(u.y());
  if (fx < 0.0 || fy < 0.0 || fx >= width_ || fy >= height_) return std::nullopt;
  return CellIndex{static_cast<int>(fx), static_cast<int>(fy)};
}

std::size_t OccupancyGrid::count(CellState s) const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), s));
}

bool OccupancyGrid::same_geometry(const OccupancyGrid& other) const {
  return width_ == other.width_ && height_ == other.height_ &&
         resolution_ == other.resolution_ && origin_ == other.origin_;
}

OccupancyGrid load_world(std::string_view text) {
  std::vector<std::string> lines;
  {
    std::string s(text);
    std::istringstream is(s);
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(line);
    }
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw WorldFormatError("world: missing header");

  std::istringstream header(lines.front());
  std::string kw_res, kw_origin, extra;
  double res = 0.0, ox = 0.0, oy = 0.0;
  if (!(header >> kw_res >> res >> kw_origin >> ox >> oy) || kw_res != "res" ||
      kw_origin != "origin" || (header >> extra)) {
    throw WorldFormatError("world: header must read 'res <m> origin <x> <y>'");
  }
  if (!(res > 0.0) || !std::isfinite(res) || !std::isfinite(ox) || !std::isfinite(oy)) {
    throw WorldFormatError("world: resolution must be > 0 and origin finite");
  }

  const std::size_t rows = lines.size() - 1;
  if (rows == 0) throw WorldFormatError("world: no grid rows");
  const std::size_t cols = lines[1].size();
  if (cols == 0) throw WorldFormatError("world: empty grid row");

  OccupancyGrid grid(static_cast<int>(cols), static_cast<int>(rows), res, Vec2(ox, oy));
  for (std::size_t r = 0; r < rows; ++r) {
    const std::string& row = lines[r + 1];
    if (row.size() != cols) {
      throw WorldFormatError("world: ragged row " + std::to_string(r + 1) + " (expected " +
                             std::to_string(cols) + " cells, got " +
                             std::to_string(row.size()) + ")");
    }
    const int iy = static_cast<int>(rows - 1 - r);
    for (std::size_t c = 0; c < cols; ++c) {
      CellState s{};
      switch (row[c]) {
        case '#': s = CellState::occupied; break;
        case '.': s = CellState::free; break;
        case '?': s = CellState::unknown; break;
        default:
          throw WorldFormatError("world: unknown character '" + std::string(1, row[c]) +
                                 "' at row " + std::to_string(r + 1) + ", column " +
                                 std::to_string(c + 1));
      }
      grid.set(static_cast<int>(c), iy, s);
    }
  }
  return grid;
}

OccupancyGrid load_world_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw WorldFormatError("world: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_world(ss.str());
}

std::string save_world(const OccupancyGrid& grid) {
  std::string out = "res " + format_number(grid.resolution()) + " origin " +
                    format_number(grid.origin().x()) + " " + format_number(grid.origin().y()) +
                    "\n";
  out.reserve(out.size() + grid.size() + static_cast<std::size_t>(grid.height()));
  for (int iy = grid.height() - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < grid.width(); ++ix) out.push_back(cell_char(grid.at(ix, iy)));
    out.push_back('\n');
  }
  return out;
}

void traverse_ray(const OccupancyGrid& grid, const Vec2& p, const Vec2& d, double max_t,
                  const std::function<bool(const CellIndex&, double)>& visit) {
  auto start = grid.cell_of(p);
  if (!start) return;
  const double res = grid.resolution();
  const Vec2 u = (p - grid.origin()) / res;
  int ix = start->ix;
  int iy = start->iy;

  const int step_x = d.x() > 0.0 ? 1 : (d.x() < 0.0 ? -1 : 0);
  const int step_y = d.y() > 0.0 ? 1 : (d.y() < 0.0 ? -1 : 0);
  double t_max_x = step_x > 0   ? ((ix + 1) - u.x()) * res / d.x()
                   : step_x < 0 ? (u.x() - ix) * res / -d.x()
                                : kInf;
  double t_max_y = step_y > 0   ? ((iy + 1) - u.y()) * res / d.y()
                   : step_y < 0 ? (u.y() - iy) * res / -d.y()
                                : kInf;
  const double dt_x = step_x != 0 ? res / std::abs(d.x()) : kInf;
  const double dt_y = step_y != 0 ? res / std::abs(d.y()) : kInf;

  double t_enter = 0.0;
  while (true) {
    if (!visit(CellIndex{ix, iy}, t_enter)) return;
    const double t_next = std::min(t_max_x, t_max_y);
    if (!(t_next <= max_t)) return;
    t_enter = t_next;
    if (t_max_x < t_max_y) {
      ix += step_x;
      t_max_x += dt_x;
    } else if (t_max_y < t_max_x) {
      iy += step_y;
      t_max_y += dt_y;
    } else {
      ix += step_x;
      iy += step_y;
      t_max_x += dt_x;
      t_max_y += dt_y;
    }
    if (!grid.in_bounds(ix, iy)) return;
  }
}

std::vector<Vec2> LidarScan::hit_points() const {
  std::vector<Vec2> out;
  for (const auto& b : beams) {
    if (b.hit) out.push_back(*b.hit);
  }
  return out;
}

LidarScan lidar_scan(const OccupancyGrid& truth, const UnicyclePose& pose, int n_beams,
                     double max_range) {
  if (n_beams < 1) throw std::invalid_argument("lidar needs at least one beam");
  if (!(max_range > 0.0) || !std::isfinite(max_range)) {
    throw std::invalid_argument("lidar max_range must be > 0");
  }
  const auto cell = truth.cell_of(pose.position);
  if (!cell) throw PoseOutOfBounds("lidar pose lies outside the grid");
  if (truth.at(*cell) == CellState::occupied) throw PoseInObstacle("lidar pose is in an occupied cell");

  LidarScan scan;
  scan.pose = pose;
  scan.max_range = max_range;
  scan.grid_width = truth.width();
  scan.grid_height = truth.height();
  scan.grid_resolution = truth.resolution();
  scan.grid_origin = truth.origin();
  scan.beams.reserve(static_cast<std::size_t>(n_beams));
  for (int k = 0; k < n_beams; ++k) {
    LidarBeam beam;
    beam.angle = -std::numbers::pi + 2.0 * std::numbers::pi * k / n_beams;
    beam.range = max_range;
    const Vec2 d = heading_vector(pose.heading + beam.angle);
    traverse_ray(truth, pose.position, d, max_range, [&](const CellIndex& c, double t) {
      if (truth.at(c) != CellState::occupied) return true;
      if (t <= 0.0) throw PoseInObstacle("lidar pose lies on the face of an occupied cell");
      if (t < max_range) {
        beam.range = t;
        beam.hit = pose.position + t * d;
        beam.hit_cell = c;
      }
      return false;
    });
    scan.beams.push_back(std::move(beam));
  }
  return scan;
}

std::size_t update_map_in_place(OccupancyGrid& known, const LidarScan& scan) {
  if (known.width() != scan.grid_width || known.height() != scan.grid_height ||
      known.resolution() != scan.grid_resolution || known.origin() != scan.grid_origin) {
    throw GeometryMismatch("map and scan come from grids of different geometry");
  }
  std::size_t fresh = 0;
  auto mark = [&](const CellIndex& c, CellState s) {
    if (known.at(c) == CellState::unknown) {
      known.set(c, s);
      ++fresh;
    }
  };
  for (const auto& beam : scan.beams) {
    const Vec2 d = heading_vector(scan.pose.heading + beam.angle);
    const double limit = beam.hit ? beam.range : scan.max_range;
    traverse_ray(known, scan.pose.position, d, scan.max_range, [&](const CellIndex& c, double t) {
      if (beam.hit_cell && c == *beam.hit_cell) {
        mark(c, CellState::occupied);
        return false;
      }
      if (t >= limit) return false;
      mark(c, CellState::free);
      return true;
    });
  }
  return fresh;
}

OccupancyGrid update_map(const OccupancyGrid& known, const LidarScan& scan) {
  OccupancyGrid out = known;
  update_map_in_place(out, scan);
  return out;
}

std::vector<CellIndex> frontier_cells(const OccupancyGrid& known) {
  std::vector<CellIndex> out;
  for (int iy = 0; iy < known.height(); ++iy) {
    for (int ix = 0; ix < known.width(); ++ix) {
      if (known.at(ix, iy) != CellState::free) continue;
      const bool frontier =
          (ix > 0 && known.at(ix - 1, iy) == CellState::unknown) ||
          (ix + 1 < known.width() && known.at(ix + 1, iy) == CellState::unknown) ||
          (iy > 0 && known.at(ix, iy - 1) == CellState::unknown) ||
          (iy + 1 < known.height() && known.at(ix, iy + 1) == CellState::unknown);
      if (frontier) out.push_back({ix, iy});
    }
  }
  std::sort(out.begin(), out.end(), [&](const CellIndex& a, const CellIndex& b) {
    return known.index(a) < known.index(b);
  });
  return out;
}

namespace {

// Squared distance transform of a sampled function along one line
// (lower envelope of parabolas).
void squared_edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
                    std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  auto intersect = [&](int q, int r) {
    return ((f[static_cast<std::size_t>(q)] + double(q) * q) -
            (f[static_cast<std::size_t>(r)] + double(r) * r)) /
           (2.0 * (q - r));
  };
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[static_cast<std::size_t>(k)]);
    while (s <= z[static_cast<std::size_t>(k)]) {
      --k;
      s = intersect(q, v[static_cast<std::size_t>(k)]);
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k) + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(k) + 1] < q) ++k;
    const int r = v[static_cast<std::size_t>(k)];
    d[static_cast<std::size_t>(q)] = double(q - r) * (q - r) + f[static_cast<std::size_t>(r)];
  }
}

}  // namespace

DistanceField distance_transform(const OccupancyGrid& known, ObstacleSet obstacles) {
  const int w = known.width();
  const int h = known.height();
  DistanceField field;
  field.width = w;
  field.height = h;
  field.resolution = known.resolution();
  field.metres.assign(known.size(), kNoObstacleDistance);

  auto is_site = [&](int ix, int iy) {
    const CellState s = known.at(ix, iy);
    return s == CellState::occupied ||
           (obstacles == ObstacleSet::occupied_and_unknown && s == CellState::unknown);
  };

  // Sentinel for "no site on this line"; large but far from overflow.
  constexpr double kFar = 1e20;
  bool any_site = false;
  std::vector<double> g(known.size(), kFar);
  // Columns: exact 1D distance to the nearest site by two sweeps.
  for (int ix = 0; ix < w; ++ix) {
    double last = -1.0;
    for (int iy = 0; iy < h; ++iy) {
      if (is_site(ix, iy)) {
        last = iy;
        any_site = true;
      }
      if (last >= 0.0) g[known.index(ix, iy)] = (iy - last) * (iy - last);
    }
    last = -1.0;
    for (int iy = h - 1; iy >= 0; --iy) {
      if (is_site(ix, iy)) last = iy;
      if (last >= 0.0) {
        const double dd = (last - iy) * (last - iy);
        g[known.index(ix, iy)] = std::min(g[known.index(ix, iy)], dd);
      }
    }
  }
  if (!any_site) return field;

  std::vector<double> f(static_cast<std::size_t>(w)), d(static_cast<std::size_t>(w));
  std::vector<int> v(static_cast<std::size_t>(w));
  std::vector<double> z(static_cast<std::size_t>(w) + 1);
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) f[static_cast<std::size_t>(ix)] = g[known.index(ix, iy)];
    squared_edt_1d(f, d, v, z);
    for (int ix = 0; ix < w; ++ix) {
      field.metres[known.index(ix, iy)] = std::sqrt(d[static_cast<std::size_t>(ix)]) * field.resolution;
    }
  }
  return field;
}

double point_clearance(const OccupancyGrid& grid, const DistanceField& field, const Vec2& p) {
  const auto c = grid.cell_of(p);
  if (!c) return 0.0;
  const double bound = field.at(*c) - (p - grid.cell_center(*c)).norm() -
                       grid.resolution() / std::numbers::sqrt2;
  return std::max(0.0, bound);
}

namespace {

struct PlannerFields {
  DistanceField occupied;  // traversability and smoothing
  DistanceField unfree;    // cost
};

bool traversable(const OccupancyGrid& known, const PlannerFields& fields, const PlanOptions& opt,
                 const CellIndex& c) {
  if (known.at(c) != CellState::free) return false;
  return point_clearance(known, fields.occupied, known.cell_center(c)) >= opt.min_clearance;
}

double cost_density(const OccupancyGrid& known, const PlannerFields& fields,
                    const PlanOptions& opt, const Vec2& p) {
  const auto c = known.cell_of(p);
  const double clearance = c ? fields.unfree.at(*c) : 0.0;
  return 1.0 + opt.cost_weight / std::max(clearance, known.resolution());
}

CostMap run_dijkstra(const OccupancyGrid& known, const PlannerFields& fields,
                     const CellIndex& start, const PlanOptions& opt,
                     std::optional<CellIndex> stop_at) {
  if (!known.in_bounds(start) || known.at(start) != CellState::free) {
    throw std::invalid_argument("planner start must be a free cell");
  }
  const std::size_t n = known.size();
  CostMap out;
  out.cost.assign(n, kInf);
  out.length.assign(n, kInf);
  out.parent.assign(n, -1);
  std::vector<char> done(n, 0);
  const double res = known.resolution();

  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  const std::size_t s = known.index(start);
  out.cost[s] = 0.0;
  out.length[s] = 0.0;
  open.push({0.0, s});

  static constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  static constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};
  while (!open.empty()) {
    const auto [cost, idx] = open.top();
    open.pop();
    if (done[idx]) continue;
    done[idx] = 1;
    const CellIndex c = known.cell(idx);
    if (stop_at && c == *stop_at) break;
    // cells without clearance may end a path but never extend one
    if (idx != s && !traversable(known, fields, opt, c)) continue;
    for (int k = 0; k < 8; ++k) {
      const CellIndex nb{c.ix + kDx[k], c.iy + kDy[k]};
      if (!known.in_bounds(nb)) continue;
      const std::size_t ni = known.index(nb);
      if (done[ni] || known.at(nb) != CellState::free) continue;
      const bool diagonal = k >= 4;
      if (diagonal && (known.at(c.ix + kDx[k], c.iy) != CellState::free ||
                       known.at(c.ix, c.iy + kDy[k]) != CellState::free)) {
        continue;
      }
      const double step = diagonal ? res * std::numbers::sqrt2 : res;
      const double clearance = fields.unfree.at(nb);
      const double next = cost + step * (1.0 + opt.cost_weight / std::max(clearance, res));
      if (next < out.cost[ni]) {
        out.cost[ni] = next;
        out.length[ni] = out.length[idx] + step;
        out.parent[ni] = static_cast<std::int64_t>(idx);
        open.push({next, ni});
      }
    }
  }
  return out;
}

PlannerFields planner_fields(const OccupancyGrid& known) {
  return {distance_transform(known, ObstacleSet::occupied_only),
          distance_transform(known, ObstacleSet::occupied_and_unknown)};
}

struct SegmentStats {
  double cost = 0.0;
  double min_clearance = kInf;
};

SegmentStats segment_stats(const OccupancyGrid& known, const PlannerFields& fields,
                           const PlanOptions& opt, const Vec2& a, const Vec2& b) {
  const double len = (b - a).norm();
  const double spacing = 0.25 * known.resolution();
  const int pieces = std::max(1, static_cast<int>(std::ceil(len / spacing)));
  SegmentStats st;
  for (int i = 0; i <= pieces; ++i) {
    const Vec2 p = a + (b - a) * (static_cast<double>(i) / pieces);
    st.min_clearance = std::min(st.min_clearance, point_clearance(known, fields.occupied, p));
  }
  for (int i = 0; i < pieces; ++i) {
    const Vec2 mid = a + (b - a) * ((i + 0.5) / pieces);
    st.cost += (len / pieces) * cost_density(known, fields, opt, mid);
  }
  return st;
}

}  // namespace

CostMap dijkstra(const OccupancyGrid& known, const CellIndex& start, const PlanOptions& options) {
  return run_dijkstra(known, planner_fields(known), start, options, std::nullopt);
}

PlannedPath plan_path(const OccupancyGrid& known, const CellIndex& start, const CellIndex& goal,
                      const PlanOptions& options) {
  if (!known.in_bounds(goal) || known.at(goal) != CellState::free) {
    throw std::invalid_argument("planner goal must be a free cell");
  }
  const PlannerFields fields = planner_fields(known);
  const CostMap map = run_dijkstra(known, fields, start, options, goal);
  const std::size_t gi = known.index(goal);
  if (!std::isfinite(map.cost[gi])) throw Unreachable("goal cell is not reachable");

  PlannedPath out;
  out.cost = map.cost[gi];
  for (std::int64_t i = static_cast<std::int64_t>(gi); i >= 0;
       i = map.parent[static_cast<std::size_t>(i)]) {
    out.cells.push_back(known.cell(static_cast<std::size_t>(i)));
  }
  std::reverse(out.cells.begin(), out.cells.end());
  for (const auto& c : out.cells) out.raw.push_back(known.cell_center(c));

  const std::size_t n = out.raw.size();
  std::vector<SegmentStats> seg;
  seg.reserve(n > 0 ? n - 1 : 0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    seg.push_back(segment_stats(known, fields, options, out.raw[i], out.raw[i + 1]));
  }
  out.raw_cost_integral = 0.0;
  out.raw_min_clearance = n == 1 ? point_clearance(known, fields.occupied, out.raw[0]) : kInf;
  for (const auto& s : seg) {
    out.raw_cost_integral += s.cost;
    out.raw_min_clearance = std::min(out.raw_min_clearance, s.min_clearance);
  }

  // Greedy shortcutting: from each kept vertex jump to the farthest raw vertex
  // whose chord is no costlier than the raw stretch it replaces and keeps
  // clearance above min(smoothing_clearance, clearance of that stretch).
  std::vector<Vec2> kept{out.raw.front()};
  out.smoothed_cost_integral = 0.0;
  out.smoothed_min_clearance = out.raw_min_clearance;
  if (n > 1) out.smoothed_min_clearance = kInf;
  std::size_t i = 0;
  while (i + 1 < n) {
    std::size_t next = i + 1;
    SegmentStats chosen = seg[i];
    for (std::size_t j = n - 1; j > i + 1; --j) {
      double raw_cost = 0.0;
      double raw_clear = kInf;
      for (std::size_t k = i; k < j; ++k) {
        raw_cost += seg[k].cost;
        raw_clear = std::min(raw_clear, seg[k].min_clearance);
      }
      const SegmentStats chord = segment_stats(known, fields, options, out.raw[i], out.raw[j]);
      // relative slack so a collinear chord is not lost to rounding
      if (chord.cost <= raw_cost * (1.0 + 1e-12) &&
          chord.min_clearance >= std::min(options.smoothing_clearance, raw_clear)) {
        next = j;
        chosen = chord;
        break;
      }
    }
    kept.push_back(out.raw[next]);
    out.smoothed_cost_integral += chosen.cost;
    out.smoothed_min_clearance = std::min(out.smoothed_min_clearance, chosen.min_clearance);
    i = next;
  }
  out.path = Path(std::move(kept));
  return out;
}

std::optional<CellIndex> select_frontier(const OccupancyGrid& known, const CellIndex& robot,
                                         const PlanOptions& options,
                                         std::span<const CellIndex> excluded) {
  const auto frontiers = frontier_cells(known);
  if (frontiers.empty()) return std::nullopt;
  const PlannerFields fields = planner_fields(known);
  const CostMap map = run_dijkstra(known, fields, robot, options, std::nullopt);

  std::optional<CellIndex> best;
  std::tuple<double, double, std::size_t> best_key{kInf, kInf, 0};
  for (const auto& f : frontiers) {
    if (std::find(excluded.begin(), excluded.end(), f) != excluded.end()) continue;
    const std::size_t idx = known.index(f);
    if (!std::isfinite(map.cost[idx])) continue;
    const std::tuple<double, double, std::size_t> key{-fields.occupied.at(f), map.length[idx], idx};
    if (!best || key < best_key) {
      best = f;
      best_key = key;
    }
  }
  return best;
}

}  // namespace cbc
