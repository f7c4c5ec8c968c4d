#include "cbc/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

namespace cbc {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string tag(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::ofstream open_out(const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << std::setprecision(12);
  return out;
}

void write_points(const fs::path& file, const std::vector<Vec2>& pts) {
  auto out = open_out(file);
  out << std::setprecision(9);
  for (const auto& p : pts) out << p.x() << ' ' << p.y() << '\n';
}

void write_json(const fs::path& file, const json& j) { open_out(file) << j.dump(2) << '\n'; }

Vec2 require_position(const Scenario& s) {
  if (s.initial_state.size() < 2) throw ScenarioError("initial_state: required");
  return s.initial_state.head<2>();
}

double sensing_half_width(const Scenario& s) {
  return s.corridor.bbox_half_width > 0.0 ? s.corridor.bbox_half_width : s.explore.max_range;
}

struct Panel {
  std::string name;
  double p = 1.0;
  double alpha_over_kappa = 1.0;
  std::optional<double> lambda;
  BarrierFamily family;
};

}  // namespace

std::optional<Command> parse_command(const std::string& name) {
  if (name == "corridor") return Command::corridor;
  if (name == "follow") return Command::follow;
  if (name == "explore") return Command::explore;
  if (name == "lor") return Command::lor;
  return std::nullopt;
}

const char* to_string(Command c) {
  switch (c) {
    case Command::corridor: return "corridor";
    case Command::follow: return "follow";
    case Command::explore: return "explore";
    case Command::lor: return "lor";
  }
  return "?";
}

void cmd_corridor(const Scenario& s, const fs::path& out) {
  if (s.system == SystemKind::linear) throw ScenarioError("system: corridor needs full or unicycle");
  const Vec2 x = require_position(s);
  const double kappa = s.system == SystemKind::unicycle ? s.control.kappa_v : s.control.kappa;
  fs::create_directories(out);

  const std::vector<Vec2> obstacles = scenario_obstacles(s);
  write_points(out / "obstacles.txt", obstacles);
  const BarrierFamily base = BarrierFamily::power_distance(obstacles, s.barrier.r, s.barrier.p);

  const std::vector<double> ps = s.corridor.p_values.empty() ? std::vector<double>{s.barrier.p}
                                                             : s.corridor.p_values;
  const std::vector<double> ratios = s.corridor.alpha_over_kappa.empty()
                                         ? std::vector<double>{s.control.alpha / s.control.kappa}
                                         : s.corridor.alpha_over_kappa;
  std::vector<Panel> panels;
  if (s.barrier.composition == Composition::none) {
    for (double p : ps) {
      for (double ratio : ratios) {
        panels.push_back({"p" + tag(p) + "_ak" + tag(ratio), p, ratio, std::nullopt,
                          scenario_family(s, p, s.barrier.lambda)});
      }
    }
  } else {
    const std::vector<double> lambdas =
        s.corridor.lambdas.empty() ? std::vector<double>{s.barrier.lambda} : s.corridor.lambdas;
    const double ratio = ratios.front();
    panels.push_back({"exact", s.barrier.p, ratio, std::nullopt, base});
    if (s.barrier.composition == Composition::softmin) {
      for (double l : lambdas) {
        panels.push_back({"softmin_l" + tag(l), s.barrier.p, ratio, l, scenario_family(s, s.barrier.p, l)});
      }
    } else {
      panels.push_back({"product", s.barrier.p, ratio, std::nullopt,
                        scenario_family(s, s.barrier.p, s.barrier.lambda)});
    }
  }

  const Box bbox = Box::centered(Vec(x), sensing_half_width(s));
  json manifest;
  manifest["state"] = {x.x(), x.y()};
  if (s.system == SystemKind::unicycle) manifest["heading"] = s.initial_state[2];
  manifest["bbox"] = {{bbox.lo[0], bbox.lo[1]}, {bbox.hi[0], bbox.hi[1]}};
  manifest["r"] = s.barrier.r;
  manifest["kappa"] = kappa;
  manifest["obstacles"] = "obstacles.txt";
  manifest["panels"] = json::array();

  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    const Panel& panel = panels[pi];
    const CorridorParams params{kappa, panel.alpha_over_kappa * kappa, s.control.epsilon};
    std::vector<std::pair<std::string, Corridor>> corridors;
    corridors.emplace_back(panel.name, bc_full(panel.family, Vec(x), params, AnchorCheck::allow_unsafe));
    if (s.system == SystemKind::unicycle) {
      corridors.emplace_back(panel.name + "_uni", bc_uni(panel.family, x, s.initial_state[2], params,
                                                          AnchorCheck::allow_unsafe));
    }
    for (const auto& [name, c] : corridors) {
      const Polygon poly = clip_corridor_2d(c, bbox);
      {
        auto f = open_out(out / ("corridor_" + name + ".txt"));
        write_polygons(f, std::span<const Polygon>(&poly, 1));
      }
      {
        auto f = open_out(out / ("constraints_" + name + ".csv"));
        f << "i,n1,n2,offset,h\n";
        const auto h = panel.family.values(Vec(x));
        for (std::size_t i = 0; i < c.halfspaces.size(); ++i) {
          const auto& hs = c.halfspaces[i];
          f << i + 1 << ',' << hs.normal[0] << ',' << hs.normal[1] << ',' << hs.offset << ',' << h[i] << '\n';
        }
      }
      json entry;
      entry["name"] = name;
      entry["kind"] = to_string(c.kind);
      entry["p"] = panel.p;
      entry["alpha_over_kappa"] = panel.alpha_over_kappa;
      entry["lambda"] = panel.lambda ? json(*panel.lambda) : json(nullptr);
      entry["polygon"] = "corridor_" + name + ".txt";
      entry["constraints"] = "constraints_" + name + ".csv";
      entry["area"] = polygon_area(poly);
      entry["empty"] = c.empty || poly.empty();
      entry["unsafe_anchor"] = c.unsafe_anchor;

      if (s.corridor.member_samples > 0 && !(c.empty || poly.empty())) {
        const auto members = sample_corridor(c, bbox, s.corridor.member_samples, s.seed + pi);
        auto f = open_out(out / ("members_" + name + ".csv"));
        f << "x,y,min_h_true\n";
        double worst = kInf;
        std::optional<Vec> witness;
        std::size_t negatives = 0;
        for (const auto& g : members) {
          const double h = base.min_value(g);
          f << g[0] << ',' << g[1] << ',' << h << '\n';
          if (h < 0.0) ++negatives;
          if (h < worst) {
            worst = h;
            witness = g;
          }
        }
        entry["members"] = "members_" + name + ".csv";
        entry["min_true_barrier"] = finite_or_null(worst);
        entry["negative_true_members"] = negatives;
        if (witness && worst < 0.0) entry["witness"] = {(*witness)[0], (*witness)[1]};
      }
      manifest["panels"].push_back(std::move(entry));
    }
  }
  write_json(out / "corridor.json", manifest);
}

namespace {

struct FollowRun {
  Trajectory traj;
  std::optional<std::string> failure;
};

FollowRun run_follow(const Scenario& s, const Path& path, const BarrierFamily& fam, double alpha,
                     bool throw_on_violation) {
  FollowParams fp;
  const double kappa = s.system == SystemKind::unicycle ? s.control.kappa_v : s.control.kappa;
  fp.corridor = {kappa, alpha, s.control.epsilon};
  fp.kappa_w = s.control.kappa_w;
  fp.dt = s.dt;
  fp.t_max = s.duration;
  fp.goal_tol = s.follow.goal_tol;
  fp.n_samples = s.follow.n_samples;
  fp.resolution = s.follow.resolution;
  fp.throw_on_violation = throw_on_violation;
  FollowRun run;
  try {
    run.traj = follow_path(s.system, path, fam, fp, s.initial_state);
    if (run.traj.violation) run.failure = "barrier violation";
  } catch (const GoalLost& e) {
    run.traj = e.partial;
    run.failure = e.what();
  } catch (const ViolationDetected& e) {
    run.traj = e.partial;
    run.failure = e.what();
  }
  return run;
}

json write_follow_outputs(const Scenario& s, const FollowRun& run, const Path& path,
                          const BarrierFamily& fam, const fs::path& out, const std::string& suffix) {
  const Trajectory& traj = run.traj;
  {
    auto f = open_out(out / ("trajectory" + suffix + ".csv"));
    write_trajectory_csv(f, traj);
  }
  std::size_t negative_goals = 0;
  double min_goal_h = kInf;
  double min_segment = kInf;
  {
    auto f = open_out(out / ("goal_safety" + suffix + ".csv"));
    f << "t,s_star,g1,g2,goal_h,segment_min_h\n";
    for (const auto& smp : traj.samples) {
      if (smp.goal.size() < 2) continue;
      const double gh = fam.min_value(smp.goal);
      const double seg = segment_min_barrier(fam, Vec(smp.state.head(2)), smp.goal);
      f << smp.t << ',' << (smp.s_star ? *smp.s_star : std::nan("")) << ',' << smp.goal[0] << ','
        << smp.goal[1] << ',' << gh << ',' << seg << '\n';
      min_goal_h = std::min(min_goal_h, gh);
      min_segment = std::min(min_segment, seg);
      if (seg < 0.0) ++negative_goals;
    }
  }

  // Corridor frames at evenly spaced samples.
  {
    const std::size_t n = traj.samples.size();
    const std::size_t frames = std::max<std::size_t>(1, std::min(s.follow.frames, n));
    std::vector<Polygon> polys;
    auto idx = open_out(out / ("frames" + suffix + ".csv"));
    idx << "frame,sample,t,x,y,g1,g2,s_star\n";
    const double kappa = s.system == SystemKind::unicycle ? s.control.kappa_v : s.control.kappa;
    const double alpha = suffix.empty() ? s.control.alpha : *s.follow.compare_alpha_over_kappa * kappa;
    const CorridorParams cp{kappa, alpha, s.control.epsilon};
    for (std::size_t fi = 0; fi < frames; ++fi) {
      const std::size_t k = frames == 1 ? 0 : fi * (n - 1) / (frames - 1);
      const auto& smp = traj.samples[k];
      const Vec pos = smp.state.head(2);
      const Corridor c = bc_full(fam, pos, cp, AnchorCheck::allow_unsafe);
      polys.push_back(clip_corridor_2d(c, Box::centered(pos, sensing_half_width(s))));
      idx << fi << ',' << k << ',' << smp.t << ',' << pos[0] << ',' << pos[1] << ',';
      if (smp.goal.size() >= 2) idx << smp.goal[0] << ',' << smp.goal[1];
      else idx << ',';
      idx << ',';
      if (smp.s_star) idx << *smp.s_star;
      idx << '\n';
    }
    auto f = open_out(out / ("corridors" + suffix + ".txt"));
    write_polygons(f, polys);
  }

  bool monotone = true;
  std::optional<double> last;
  for (const auto& smp : traj.samples) {
    if (!smp.s_star) continue;
    if (last && *smp.s_star < *last) monotone = false;
    last = smp.s_star;
  }
  const Vec2 end_pos = traj.samples.back().state.head<2>();
  json j;
  j["samples"] = traj.samples.size();
  j["stop"] = traj.stop == StopReason::goal_reached ? "goal_reached"
              : traj.stop == StopReason::violation  ? "violation"
              : traj.stop == StopReason::goal_lost  ? "goal_lost"
                                                    : "duration";
  j["reached"] = traj.stop == StopReason::goal_reached;
  j["final_distance_to_end"] = (end_pos - path.back()).norm();
  j["min_h"] = finite_or_null(traj.min_barrier());
  j["min_goal_barrier"] = finite_or_null(traj.min_goal_barrier());
  j["s_star_nondecreasing"] = monotone;
  j["min_goal_h"] = finite_or_null(min_goal_h);
  j["min_goal_segment_h"] = finite_or_null(min_segment);
  j["negative_goal_segments"] = negative_goals;
  j["failure"] = run.failure ? json(*run.failure) : json(nullptr);
  return j;
}

}  // namespace

void cmd_follow(const Scenario& s, const fs::path& out) {
  if (s.system == SystemKind::linear) throw ScenarioError("system: follow needs full or unicycle");
  const Vec2 x0 = require_position(s);
  std::vector<Vec2> waypoints = s.path;
  if (waypoints.empty()) {
    if (!s.goal || s.goal->size() != 2) throw ScenarioError("path: required (or a 2D goal)");
    waypoints = {x0, Vec2(*s.goal)};
  }
  const Path path(waypoints);
  const BarrierFamily fam = scenario_family(s, s.barrier.p, s.barrier.lambda);
  fs::create_directories(out);
  write_points(out / "path.txt", path.waypoints());
  write_points(out / "obstacles.txt", scenario_obstacles(s));

  const FollowRun main_run = run_follow(s, path, fam, s.control.alpha, false);
  json summary;
  summary["system"] = to_string(s.system);
  summary["alpha"] = s.control.alpha;
  summary["kappa"] = s.system == SystemKind::unicycle ? s.control.kappa_v : s.control.kappa;
  summary["run"] = write_follow_outputs(s, main_run, path, fam, out, "");
  if (s.follow.compare_alpha_over_kappa) {
    const double kappa = s.system == SystemKind::unicycle ? s.control.kappa_v : s.control.kappa;
    const double alpha = *s.follow.compare_alpha_over_kappa * kappa;
    const FollowRun cmp = run_follow(s, path, fam, alpha, false);
    json c = write_follow_outputs(s, cmp, path, fam, out, "_compare");
    c["alpha"] = alpha;
    summary["compare"] = std::move(c);
  }
  write_json(out / "summary.json", summary);
  if (main_run.failure) throw RuntimeViolation("follow: " + *main_run.failure);
}

void cmd_explore(const Scenario& s, const fs::path& out) {
  if (!s.world) throw ScenarioError("world: explore needs a world file");
  const OccupancyGrid truth = load_world_file(s.world->string());
  UnicyclePose start;
  if (s.explore_start) {
    start = *s.explore_start;
  } else {
    if (s.initial_state.size() < 2) throw ScenarioError("explore.start or initial_state: required");
    start = {s.initial_state.head<2>(), s.initial_state.size() >= 3 ? s.initial_state[2] : 0.0};
  }
  ExploreParams params = s.explore;
  try {
    const ExplorationLog log = explore(truth, start, params);
    write_exploration_log(log, params, out);
    if (log.violation) throw RuntimeViolation("explore: " + *log.violation);
  } catch (const Stuck& e) {
    write_exploration_log(e.partial, params, out);
    throw RuntimeViolation(std::string("explore: ") + e.what());
  }
}

namespace {

BarrierFamily state_family(const LorSpec& l) {
  BarrierFamily fam;
  for (const auto& b : l.barriers) {
    if (b.kind == StateBarrierSpec::Kind::affine) {
      fam.add(std::make_shared<AffineBarrier>(b.a, -b.b));  // scenario form is a . x + b
    } else {
      fam.add(std::make_shared<PowerDistanceBarrier>(b.q, b.r, b.p));
    }
  }
  return fam;
}

}  // namespace

void cmd_lor(const Scenario& s, const fs::path& out) {
  const LorSpec& l = s.lor;
  if (l.a.size() == 0) throw ScenarioError("lor: section required");
  const LinearPlant plant = LinearPlant::make(l.a, l.b, l.c, l.k);
  if (s.initial_state.size() != plant.state_dim()) {
    throw ScenarioError("initial_state: expected " + std::to_string(plant.state_dim()) + " entries");
  }
  const Vec& x0 = s.initial_state;
  const BarrierFamily fam = state_family(l);
  const auto h0 = fam.values(x0);
  for (std::size_t i = 0; i < h0.size(); ++i) {
    if (h0[i] < 0.0) {
      throw ScenarioError("initial_state: unsafe (h_" + std::to_string(i + 1) + " = " + tag(h0[i]) + ")");
    }
  }
  const double norm = spectral_norm(plant.closed_loop());
  const double alpha = l.alpha ? *l.alpha : l.alpha_fraction * norm;
  fs::create_directories(out);

  std::vector<Vec> candidates{plant.c * x0};
  std::mt19937_64 rng(s.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t k = 0; k < l.candidates; ++k) {
    Vec y(plant.output_dim());
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = l.y_lo[i] + (l.y_hi[i] - l.y_lo[i]) * unit(rng);
    candidates.push_back(std::move(y));
  }

  CorridorParams cp;
  cp.alpha_rate = alpha;
  const Corridor corridor = bc_lor(fam, x0, plant.a, plant.b, plant.c, plant.k, plant.x_map, cp);
  auto cand = open_out(out / "candidates.csv");
  auto runs = open_out(out / "runs.csv");
  cand << "k";
  for (Eigen::Index i = 0; i < plant.output_dim(); ++i) cand << ",y" << i + 1;
  cand << ",in_trust_region,in_corridor\n";
  runs << "k,min_h,final_output_error,violation\n";

  std::size_t accepted = 0;
  std::size_t violations = 0;
  double min_h = kInf;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const Vec& y = candidates[k];
    const bool in_tr = trust_region_contains(fam, x0, plant.a, plant.b, plant.k, plant.x_map, alpha, y);
    const bool in_c = corridor_contains(corridor, y);
    cand << k;
    for (Eigen::Index i = 0; i < y.size(); ++i) cand << ',' << y[i];
    cand << ',' << int(in_tr) << ',' << int(in_c) << '\n';
    if (!in_tr) continue;
    ClosedLoopSpec spec = output_regulation_loop(fam, plant, alpha, x0, y, s.duration, s.dt);
    spec.throw_on_violation = false;
    const Trajectory traj = run_closed_loop(spec);
    const double run_min = traj.min_barrier();
    min_h = std::min(min_h, run_min);
    const double err = (plant.c * traj.final_state() - y).norm();
    runs << k << ',' << run_min << ',' << err << ',' << int(traj.violation.has_value()) << '\n';
    if (traj.violation) ++violations;
    if (accepted < l.max_trajectories) {
      std::ostringstream name;
      name << "trajectory_" << std::setw(3) << std::setfill('0') << k << ".csv";
      auto f = open_out(out / name.str());
      write_trajectory_csv(f, traj);
    }
    ++accepted;
  }

  json summary;
  summary["closed_loop_norm"] = norm;
  summary["alpha"] = alpha;
  summary["candidates"] = candidates.size();
  summary["accepted"] = accepted;
  summary["violations"] = violations;
  summary["min_h"] = finite_or_null(min_h);
  summary["x_map"] = std::vector<double>(plant.x_map.data(), plant.x_map.data() + plant.x_map.size());
  summary["u_map"] = std::vector<double>(plant.u_map.data(), plant.u_map.data() + plant.u_map.size());
  write_json(out / "summary.json", summary);
  cand.close();
  runs.close();
  if (violations > 0) {
    throw RuntimeViolation("lor: " + std::to_string(violations) + " accepted goal(s) violated a barrier");
  }
}

void run_command(Command c, const Scenario& s, const fs::path& out) {
  switch (c) {
    case Command::corridor: return cmd_corridor(s, out);
    case Command::follow: return cmd_follow(s, out);
    case Command::explore: return cmd_explore(s, out);
    case Command::lor: return cmd_lor(s, out);
  }
}

void self_check(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const std::string name = f.filename().string();
    const std::string ext = f.extension().string();
    std::ifstream in(f);
    if (!in) throw std::runtime_error("self-check: cannot reopen " + f.string());
    try {
      if (ext == ".json") {
        if (json::parse(in).is_discarded()) throw std::runtime_error("unparsable JSON");
      } else if (ext == ".csv") {
        (void)read_csv(in);
      } else if (name.starts_with("map_") || name == "final_map.txt") {
        std::ostringstream ss;
        ss << in.rdbuf();
        (void)load_world(ss.str());
      } else if (name.starts_with("corridor")) {
        (void)read_polygons(in);
      } else if (ext == ".txt") {
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
          ++n;
          if (line.empty()) continue;
          std::istringstream ls(line);
          double a = 0.0, b = 0.0;
          std::string extra;
          if (!(ls >> a >> b) || (ls >> extra)) {
            throw std::runtime_error("line " + std::to_string(n) + " is not 'x y'");
          }
        }
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("self-check failed for " + f.string() + ": " + e.what());
    }
  }
}

int run_cli(Command c, const fs::path& scenario_file, const std::optional<fs::path>& out_flag,
            const std::vector<std::string>& sweeps, std::ostream& log, std::ostream& err) {
  try {
    const json doc = read_scenario_json(scenario_file);
    const fs::path base = scenario_file.parent_path();
    std::vector<Sweep> parsed;
    for (const auto& text : sweeps) parsed.push_back(parse_sweep(text));

    // Validate the base scenario before running anything.
    const Scenario base_scn = parse_scenario(doc, base);
    fs::path out_root;
    if (out_flag) out_root = *out_flag;
    else if (base_scn.out) out_root = *base_scn.out;
    else throw ScenarioError("--out: required (or set 'out' in the scenario)");

    // Cartesian product of sweep values; each run gets key=value subdirectories.
    std::vector<std::pair<json, fs::path>> runs{{doc, out_root}};
    for (const auto& sw : parsed) {
      std::vector<std::pair<json, fs::path>> next;
      for (const auto& [d, dir] : runs) {
        for (const auto& v : sw.values) {
          json copy = d;
          set_dotted(copy, sw.key, v);
          const std::string label = v.is_string() ? v.get<std::string>() : v.dump();
          next.emplace_back(std::move(copy), dir / (sw.key + "=" + label));
        }
      }
      runs = std::move(next);
    }
    std::vector<Scenario> scenarios;
    for (const auto& [d, dir] : runs) scenarios.push_back(parse_scenario(d, base));

    int code = kExitOk;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const fs::path& dir = runs[i].second;
      try {
        run_command(c, scenarios[i], dir);
        log << to_string(c) << ": wrote " << dir.string() << '\n';
      } catch (const RuntimeViolation& e) {
        err << e.what() << '\n';
        code = kExitViolation;
      }
      self_check(dir);
    }
    return code;
  } catch (const ScenarioError& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const WorldFormatError& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NotHurwitz& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const SingularBlock& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const PreconditionViolated& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const UnsafeAnchor& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace cbc
