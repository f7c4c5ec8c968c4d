#include "cbc/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace cbc {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ScenarioError(where + ": " + what);
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(where, "expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.contains(key)) fail(where, "unknown key '" + key + "'");
  }
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(where, "expected a finite number");
  return x;
}

double positive(const json& v, const std::string& where) {
  const double x = number(v, where);
  if (!(x > 0.0)) fail(where, "must be > 0");
  return x;
}

double nonnegative(const json& v, const std::string& where) {
  const double x = number(v, where);
  if (!(x >= 0.0)) fail(where, "must be >= 0");
  return x;
}

std::size_t count(const json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<long long>() < 0) fail(where, "expected a non-negative integer");
  return v.get<std::size_t>();
}

Vec vector(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) fail(where, "expected a non-empty array of numbers");
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = number(v[i], where + "[" + std::to_string(i) + "]");
  }
  return out;
}

std::vector<double> numbers(const json& v, const std::string& where) {
  const Vec x = vector(v, where);
  return {x.data(), x.data() + x.size()};
}

Vec2 point(const json& v, const std::string& where) {
  const Vec x = vector(v, where);
  if (x.size() != 2) fail(where, "expected [x, y]");
  return x;
}

std::vector<Vec2> points(const json& v, const std::string& where) {
  if (!v.is_array()) fail(where, "expected an array of [x, y]");
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(point(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

Mat matrix(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) fail(where, "expected a non-empty array of rows");
  const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
  if (cols == 0) fail(where, "rows must be non-empty arrays");
  Mat out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < v.size(); ++r) {
    const Vec row = vector(v[r], where + "[" + std::to_string(r) + "]");
    if (static_cast<std::size_t>(row.size()) != cols) fail(where, "ragged matrix");
    out.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return out;
}

void parse_barrier(const json& j, BarrierSpec& b) {
  check_keys(j, "barrier", {"p", "r", "composition", "lambda"});
  if (j.contains("p")) b.p = positive(j["p"], "barrier.p");
  if (j.contains("r")) b.r = nonnegative(j["r"], "barrier.r");
  if (j.contains("lambda")) b.lambda = positive(j["lambda"], "barrier.lambda");
  if (j.contains("composition")) {
    const auto& c = j["composition"];
    if (c == "none") b.composition = Composition::none;
    else if (c == "softmin") b.composition = Composition::softmin;
    else if (c == "product") b.composition = Composition::product;
    else fail("barrier.composition", "expected none, softmin or product");
  }
}

void parse_control(const json& j, ControlSpec& c) {
  check_keys(j, "control", {"kappa", "kappa_v", "kappa_w", "alpha", "epsilon"});
  if (j.contains("kappa")) c.kappa = positive(j["kappa"], "control.kappa");
  if (j.contains("kappa_v")) c.kappa_v = positive(j["kappa_v"], "control.kappa_v");
  if (j.contains("kappa_w")) c.kappa_w = positive(j["kappa_w"], "control.kappa_w");
  if (j.contains("alpha")) c.alpha = positive(j["alpha"], "control.alpha");
  if (j.contains("epsilon")) c.epsilon = nonnegative(j["epsilon"], "control.epsilon");
}

void parse_corridor(const json& j, CorridorSweepSpec& c) {
  check_keys(j, "corridor", {"p", "alpha_over_kappa", "lambda", "bbox_half_width", "member_samples"});
  if (j.contains("p")) c.p_values = numbers(j["p"], "corridor.p");
  if (j.contains("alpha_over_kappa")) c.alpha_over_kappa = numbers(j["alpha_over_kappa"], "corridor.alpha_over_kappa");
  if (j.contains("lambda")) c.lambdas = numbers(j["lambda"], "corridor.lambda");
  for (double v : c.p_values) if (!(v > 0.0)) fail("corridor.p", "values must be > 0");
  for (double v : c.alpha_over_kappa) if (!(v > 0.0)) fail("corridor.alpha_over_kappa", "values must be > 0");
  for (double v : c.lambdas) if (!(v > 0.0)) fail("corridor.lambda", "values must be > 0");
  if (j.contains("bbox_half_width")) c.bbox_half_width = positive(j["bbox_half_width"], "corridor.bbox_half_width");
  if (j.contains("member_samples")) c.member_samples = count(j["member_samples"], "corridor.member_samples");
}

void parse_follow(const json& j, FollowSpec& f) {
  check_keys(j, "follow", {"compare_alpha_over_kappa", "frames", "goal_tol", "n_samples", "resolution"});
  if (j.contains("compare_alpha_over_kappa")) {
    f.compare_alpha_over_kappa = positive(j["compare_alpha_over_kappa"], "follow.compare_alpha_over_kappa");
  }
  if (j.contains("frames")) f.frames = count(j["frames"], "follow.frames");
  if (j.contains("goal_tol")) f.goal_tol = positive(j["goal_tol"], "follow.goal_tol");
  if (j.contains("n_samples")) {
    f.n_samples = count(j["n_samples"], "follow.n_samples");
    if (f.n_samples < 2) fail("follow.n_samples", "must be >= 2");
  }
  if (j.contains("resolution")) f.resolution = positive(j["resolution"], "follow.resolution");
}

void parse_explore(const json& j, Scenario& s) {
  check_keys(j, "explore", {"start", "robot_radius", "n_beams", "max_range", "clearance_margin",
                            "cost_weight", "cycle_time_limit", "max_cycles", "map_mode_radius"});
  ExploreParams& e = s.explore;
  if (j.contains("start")) {
    const Vec v = vector(j["start"], "explore.start");
    if (v.size() != 3) fail("explore.start", "expected [x, y, theta]");
    s.explore_start = UnicyclePose{v.head<2>(), v[2]};
  }
  if (j.contains("robot_radius")) e.robot_radius = positive(j["robot_radius"], "explore.robot_radius");
  if (j.contains("n_beams")) {
    const std::size_t n = count(j["n_beams"], "explore.n_beams");
    if (n < 1) fail("explore.n_beams", "must be >= 1");
    e.n_beams = static_cast<int>(n);
  }
  if (j.contains("max_range")) e.max_range = positive(j["max_range"], "explore.max_range");
  if (j.contains("clearance_margin")) e.clearance_margin = nonnegative(j["clearance_margin"], "explore.clearance_margin");
  if (j.contains("cost_weight")) e.cost_weight = nonnegative(j["cost_weight"], "explore.cost_weight");
  if (j.contains("cycle_time_limit")) e.cycle_time_limit = positive(j["cycle_time_limit"], "explore.cycle_time_limit");
  if (j.contains("max_cycles")) {
    e.max_cycles = count(j["max_cycles"], "explore.max_cycles");
    if (e.max_cycles < 1) fail("explore.max_cycles", "must be >= 1");
  }
  if (j.contains("map_mode_radius")) e.map_mode_radius = positive(j["map_mode_radius"], "explore.map_mode_radius");
}

void parse_lor(const json& j, LorSpec& l) {
  check_keys(j, "lor", {"A", "B", "C", "K", "barriers", "candidates", "y_range", "alpha",
                        "alpha_fraction", "max_trajectories"});
  for (const char* key : {"A", "B", "C", "K"}) {
    if (!j.contains(key)) fail("lor", std::string("missing ") + key);
  }
  l.a = matrix(j["A"], "lor.A");
  l.b = matrix(j["B"], "lor.B");
  l.c = matrix(j["C"], "lor.C");
  l.k = matrix(j["K"], "lor.K");
  const Eigen::Index n = l.a.rows();
  if (l.a.cols() != n || l.b.rows() != n || l.c.cols() != n || l.k.rows() != l.b.cols() ||
      l.k.cols() != n) {
    fail("lor", "A, B, C, K shapes are inconsistent");
  }
  if (j.contains("barriers")) {
    const auto& arr = j["barriers"];
    if (!arr.is_array()) fail("lor.barriers", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = "lor.barriers[" + std::to_string(i) + "]";
      const auto& bj = arr[i];
      StateBarrierSpec b;
      if (!bj.is_object() || !bj.contains("type")) fail(where, "expected an object with a type");
      if (bj["type"] == "affine") {
        check_keys(bj, where, {"type", "a", "b"});
        b.kind = StateBarrierSpec::Kind::affine;
        b.a = vector(bj.at("a"), where + ".a");
        b.b = number(bj.at("b"), where + ".b");
        if (b.a.size() != n) fail(where, "a must have the state dimension");
      } else if (bj["type"] == "power") {
        check_keys(bj, where, {"type", "q", "r", "p"});
        b.kind = StateBarrierSpec::Kind::power;
        b.q = vector(bj.at("q"), where + ".q");
        b.r = nonnegative(bj.at("r"), where + ".r");
        if (bj.contains("p")) b.p = positive(bj["p"], where + ".p");
        if (b.q.size() != n) fail(where, "q must have the state dimension");
      } else {
        fail(where, "type must be affine or power");
      }
      l.barriers.push_back(std::move(b));
    }
  }
  if (j.contains("candidates")) l.candidates = count(j["candidates"], "lor.candidates");
  const Eigen::Index p = l.c.rows();
  l.y_lo = Vec::Constant(p, -1.0);
  l.y_hi = Vec::Constant(p, 1.0);
  if (j.contains("y_range")) {
    const auto& yr = j["y_range"];
    if (!yr.is_array() || yr.size() != static_cast<std::size_t>(p)) {
      fail("lor.y_range", "expected one [lo, hi] per output");
    }
    for (Eigen::Index i = 0; i < p; ++i) {
      const Vec2 lh = point(yr[static_cast<std::size_t>(i)], "lor.y_range");
      if (!(lh[0] < lh[1])) fail("lor.y_range", "lo must be < hi");
      l.y_lo[i] = lh[0];
      l.y_hi[i] = lh[1];
    }
  }
  if (j.contains("alpha")) l.alpha = positive(j["alpha"], "lor.alpha");
  if (j.contains("alpha_fraction")) l.alpha_fraction = positive(j["alpha_fraction"], "lor.alpha_fraction");
  if (j.contains("max_trajectories")) l.max_trajectories = count(j["max_trajectories"], "lor.max_trajectories");
}

}  // namespace

Scenario parse_scenario(const json& doc, const std::filesystem::path& base_dir) {
  check_keys(doc, "scenario",
             {"name", "seed", "world", "obstacles", "barrier", "control", "system", "initial_state",
              "goal", "path", "dt", "duration", "corridor", "follow", "explore", "lor", "out"});
  Scenario s;
  s.base_dir = base_dir;
  if (doc.contains("name")) {
    if (!doc["name"].is_string()) fail("name", "expected a string");
    s.name = doc["name"].get<std::string>();
  }
  if (doc.contains("seed")) s.seed = count(doc["seed"], "seed");
  if (doc.contains("world")) {
    if (!doc["world"].is_string()) fail("world", "expected a file path");
    s.world = base_dir / doc["world"].get<std::string>();
    if (!std::filesystem::exists(*s.world)) fail("world", "file not found: " + s.world->string());
  }
  if (doc.contains("obstacles")) s.obstacles = points(doc["obstacles"], "obstacles");
  if (doc.contains("barrier")) parse_barrier(doc["barrier"], s.barrier);
  if (doc.contains("control")) parse_control(doc["control"], s.control);
  if (doc.contains("system")) {
    const auto& k = doc["system"];
    if (k == "full") s.system = SystemKind::full;
    else if (k == "unicycle") s.system = SystemKind::unicycle;
    else if (k == "linear") s.system = SystemKind::linear;
    else fail("system", "expected full, unicycle or linear");
  }
  if (doc.contains("initial_state")) s.initial_state = vector(doc["initial_state"], "initial_state");
  if (doc.contains("goal")) s.goal = vector(doc["goal"], "goal");
  if (doc.contains("path")) {
    s.path = points(doc["path"], "path");
    if (s.path.empty()) fail("path", "needs at least one point");
  }
  if (doc.contains("dt")) s.dt = positive(doc["dt"], "dt");
  if (doc.contains("duration")) s.duration = positive(doc["duration"], "duration");
  if (doc.contains("corridor")) parse_corridor(doc["corridor"], s.corridor);
  if (doc.contains("follow")) parse_follow(doc["follow"], s.follow);
  if (doc.contains("explore")) parse_explore(doc["explore"], s);
  if (doc.contains("lor")) parse_lor(doc["lor"], s.lor);
  if (doc.contains("out")) {
    if (!doc["out"].is_string()) fail("out", "expected a directory path");
    s.out = base_dir / doc["out"].get<std::string>();
  }

  s.explore.corridor = {s.control.kappa_v, s.control.alpha, s.control.epsilon};
  s.explore.kappa_w = s.control.kappa_w;
  s.explore.power = s.barrier.p;
  if (doc.contains("dt") && doc.contains("explore")) s.explore.dt = s.dt;

  if (s.initial_state.size() > 0) {
    const Eigen::Index want = s.system == SystemKind::unicycle ? 3 : 2;
    if (s.system != SystemKind::linear && s.initial_state.size() != want) {
      fail("initial_state", s.system == SystemKind::unicycle ? "expected [x, y, theta]" : "expected [x, y]");
    }
  }
  return s;
}

nlohmann::json read_scenario_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ScenarioError("cannot open scenario file " + file.string());
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ScenarioError(file.string() + ": " + e.what());
  }
}

Scenario load_scenario(const std::filesystem::path& file) {
  return parse_scenario(read_scenario_json(file), file.parent_path());
}

void set_dotted(json& doc, const std::string& dotted_key, const json& value) {
  if (dotted_key.empty()) throw ScenarioError("sweep: empty key");
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted_key.find('.', start);
    const std::string part = dotted_key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ScenarioError("sweep: malformed key '" + dotted_key + "'");
    if (!node->is_object()) throw ScenarioError("sweep: '" + dotted_key + "' does not name an object path");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

Sweep parse_sweep(const std::string& text) {
  const std::size_t eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 >= text.size()) {
    throw ScenarioError("sweep: expected key=v1,v2,... but got '" + text + "'");
  }
  Sweep sw;
  sw.key = text.substr(0, eq);
  std::istringstream rest(text.substr(eq + 1));
  std::string item;
  while (std::getline(rest, item, ',')) {
    if (item.empty()) throw ScenarioError("sweep: empty value in '" + text + "'");
    json v = json::parse(item, nullptr, false);
    sw.values.push_back(v.is_discarded() ? json(item) : v);
  }
  if (sw.values.empty()) throw ScenarioError("sweep: no values in '" + text + "'");
  return sw;
}

std::vector<Vec2> scenario_obstacles(const Scenario& s) {
  std::vector<Vec2> out = s.obstacles;
  if (s.world) {
    if (s.initial_state.size() < 2) throw ScenarioError("initial_state: needed to scan the world");
    const OccupancyGrid truth = load_world_file(s.world->string());
    const double heading = s.initial_state.size() >= 3 && s.system == SystemKind::unicycle ? s.initial_state[2] : 0.0;
    const LidarScan scan = lidar_scan(truth, {s.initial_state.head<2>(), heading}, s.explore.n_beams,
                                      s.explore.max_range);
    for (const auto& p : scan.hit_points()) out.push_back(p);
  }
  return out;
}

BarrierFamily scenario_family(const Scenario& s, double p, double lambda) {
  BarrierFamily base = BarrierFamily::power_distance(scenario_obstacles(s), s.barrier.r, p);
  switch (s.barrier.composition) {
    case Composition::none: return base;
    case Composition::softmin: {
      if (base.empty()) return base;
      BarrierFamily out;
      out.add(softmin_compose(base, lambda));
      return out;
    }
    case Composition::product: {
      if (base.empty()) return base;
      BarrierFamily out;
      out.add(product_compose(base));
      return out;
    }
  }
  return base;
}

}  // namespace cbc
