#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "cbc/pathfollow.hpp"
#include "support.hpp"

using namespace cbc;
using cbc::test::Rng;

namespace {

std::string world_path(const char* name) { return std::string(CBC_SOURCE_DIR) + "/worlds/" + name; }

Corridor halfplane_g1_le_1() {
  const auto fam = BarrierFamily::power_distance({Vec2(2, 0)}, 1.0, 1.0);
  return bc_full(fam, Vec2::Zero(), {1, 1, 0});
}

Vec2 room_centre(const OccupancyGrid& g) {
  return g.origin() + 0.5 * g.resolution() * Vec2(g.width(), g.height());
}

}  // namespace

TEST_CASE("path parameterisation") {
  const Path p({Vec2(0, 0), Vec2(3, 0), Vec2(3, 0), Vec2(3, 1)});
  CHECK(p.waypoints().size() == 3);
  CHECK(p.length() == doctest::Approx(4.0));
  CHECK(p.at(0.0).isApprox(Vec2(0, 0)));
  CHECK(p.at(1.0).isApprox(Vec2(3, 1)));
  CHECK(p.at(0.5).isApprox(Vec2(2, 0)));
  CHECK(p.at(0.875).isApprox(Vec2(3, 0.5)));
  CHECK(p.at(-3.0).isApprox(Vec2(0, 0)));
  CHECK(p.at(7.0).isApprox(Vec2(3, 1)));
  CHECK_THROWS((void)Path(std::vector<Vec2>{}));
  CHECK(default_path_samples(p, 0.05) == 320);
  CHECK(default_path_samples(Path({Vec2(0, 0), Vec2(0.1, 0)}), 0.05) == 100);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    std::vector<Vec2> w;
    for (int k = 0; k < 5; ++k) w.push_back(rng.point(-2, 2));
    const Path r(w);
    const double a = rng.uniform(0, 1), b = rng.uniform(0, 1);
    // arc length between two parameters equals their difference times the
    // length; chords are exact once every waypoint is a breakpoint
    double total = 0.0;
    std::vector<double> cuts{std::min(a, b), std::max(a, b)};
    for (std::size_t k = 1; k < w.size(); ++k) total += (w[k] - w[k - 1]).norm();
    double run = 0.0;
    for (std::size_t k = 1; k + 1 < w.size(); ++k) {
      run += (w[k] - w[k - 1]).norm();
      if (run / total > cuts[0] && run / total < cuts[1]) cuts.push_back(run / total);
    }
    std::sort(cuts.begin(), cuts.end());
    double along = 0.0;
    for (std::size_t k = 1; k < cuts.size(); ++k) along += (r.at(cuts[k]) - r.at(cuts[k - 1])).norm();
    CHECK(along == doctest::Approx(std::abs(a - b) * r.length()).epsilon(1e-6));
  }
}

TEST_CASE("path goal selection") {
  const auto c = halfplane_g1_le_1();
  SUBCASE("whole path inside") {
    const auto g = select_path_goal(Path({Vec2(0, 0), Vec2(0, 3)}), c, 50);
    REQUIRE(g);
    CHECK(g->s_star == 1.0);
    CHECK(g->point.isApprox(Vec2(0, 3)));
  }
  SUBCASE("nothing inside") {
    CHECK_FALSE(select_path_goal(Path({Vec2(2, 0), Vec2(2, 3)}), c, 50).has_value());
  }
  SUBCASE("straight path across the boundary") {
    const std::size_t n = 301;
    const auto g = select_path_goal(Path({Vec2(0, 0), Vec2(3, 0)}), c, n);
    REQUIRE(g);
    CHECK(g->point.x() <= 1.0);
    CHECK((g->point - Vec2(1, 0)).norm() <= 3.0 / (n - 1) + 1e-12);
  }
  SUBCASE("a path that leaves and re-enters uses the last member") {
    const auto g = select_path_goal(Path({Vec2(0, 0), Vec2(3, 0), Vec2(0, 1)}), c, 100);
    REQUIRE(g);
    CHECK(g->s_star == 1.0);
  }
  SUBCASE("needs two samples") { CHECK_THROWS((void)select_path_goal(Path({Vec2(0, 0), Vec2(1, 0)}), c, 1)); }
  SUBCASE("property: the choice is the largest member sample") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
      const auto s = cbc::test::random_scene(rng, 6, 1.0);
      const auto corridor = bc_full(s.family(), s.x, {1, 1, 0});
      std::vector<Vec2> w{s.x};
      for (int k = 0; k < 3; ++k) w.push_back(rng.point(-3, 3));
      const Path path(w);
      const std::size_t n = 64;
      const auto g = select_path_goal(path, corridor, n);
      std::optional<std::size_t> best;
      for (std::size_t k = 0; k < n; ++k) {
        if (corridor_contains(corridor, path.at(static_cast<double>(k) / (n - 1)))) best = k;
      }
      REQUIRE(best.has_value());  // the first sample is the anchor
      REQUIRE(g.has_value());
      CHECK(g->sample == *best);
    }
  }
}

TEST_CASE("path following") {
  const auto fam = BarrierFamily::power_distance({Vec2(2, 0.5)}, 0.3, 1.0);
  const Path path({Vec2(0, 0), Vec2(4, 0)});
  FollowParams params;
  params.corridor = {1, 1, 0};
  params.t_max = 40;
  SUBCASE("fully actuated: reaches the end safely with monotone progress") {
    const auto traj = follow_path(SystemKind::full, path, fam, params, Vec2(0, 0));
    CHECK(traj.stop == StopReason::goal_reached);
    CHECK((Vec2(traj.final_state()) - path.back()).norm() <= follow_goal_tolerance(SystemKind::full, params));
    CHECK(traj.min_barrier() >= -1e-6);
    for (std::size_t i = 1; i < traj.samples.size(); ++i) {
      REQUIRE(traj.samples[i].s_star.has_value());
      CHECK(*traj.samples[i].s_star >= *traj.samples[i - 1].s_star);
    }
  }
  SUBCASE("unicycle") {
    params.corridor.epsilon = 0.05;
    Vec x0(3);
    x0 << 0, 0, 0.4;
    const auto traj = follow_path(SystemKind::unicycle, path, fam, params, x0);
    CHECK(traj.stop == StopReason::goal_reached);
    CHECK(traj.min_barrier() >= -1e-6);
    for (std::size_t i = 1; i < traj.samples.size(); ++i) {
      CHECK(*traj.samples[i].s_star >= *traj.samples[i - 1].s_star);
    }
  }
  SUBCASE("a path inside the first corridor is plain goal control") {
    const auto far = BarrierFamily::power_distance({Vec2(0, 10)}, 0.3, 1.0);
    const Path shortp({Vec2(0, 0), Vec2(1, 0)});
    const auto traj = follow_path(SystemKind::full, shortp, far, params, Vec2(0, 0));
    for (const auto& s : traj.samples) CHECK(*s.s_star == 1.0);
    const double t = traj.samples.back().t;
    // held control contracts the error by 1 - kappa dt per step
    const double steps = static_cast<double>(traj.samples.size() - 1);
    CHECK(traj.final_state()[0] ==
          doctest::Approx(1.0 - std::pow(1.0 - params.corridor.kappa * params.dt, steps)).epsilon(1e-9));
    CHECK(traj.final_state()[0] == doctest::Approx(1.0 - std::exp(-t)).epsilon(1e-5));
  }
  SUBCASE("an unsafe path is rejected") {
    const auto blocking = BarrierFamily::power_distance({Vec2(2, 0.1)}, 0.3, 1.0);
    CHECK_THROWS_AS((void)follow_path(SystemKind::full, path, blocking, params, Vec2(0, 0)), PreconditionViolated);
  }
  SUBCASE("a path missing the first corridor is rejected") {
    const auto wall = BarrierFamily::power_distance({Vec2(1.2, 0.0)}, 0.3, 1.0);
    CHECK_THROWS_AS((void)follow_path(SystemKind::full, Path({Vec2(3, 0), Vec2(4, 0)}), wall, params, Vec2(0, 0)),
                    PreconditionViolated);
  }
}

TEST_CASE("segment barrier") {
  const auto fam = BarrierFamily::power_distance({Vec2(1, 0.1)}, 0.3, 1.0);
  CHECK(segment_min_barrier(fam, Vec2(0, 0), Vec2(2, 0)) == doctest::Approx(-0.2).epsilon(1e-9));
  CHECK(segment_min_barrier(fam, Vec2(0, 1), Vec2(0, 2)) == doctest::Approx(std::hypot(1.0, 0.9) - 0.3));
}

TEST_CASE("exploration") {
  ExploreParams params;
  SUBCASE("single room") {
    const auto room = load_world_file(world_path("room.txt"));
    const auto log = explore(room, {room_centre(room), 0.0}, params);
    CHECK(log.completed);
    CHECK(log.cycles.size() <= 2);
    CHECK(log.coverage() == 1.0);
    CHECK_FALSE(log.violation.has_value());
    CHECK(log.min_barrier >= -1e-6);
  }
  SUBCASE("sealed pocket stays unknown") {
    const auto world = load_world_file(world_path("sealed_pocket.txt"));
    const Vec2 start = world.cell_center({5, 5});
    const auto log = explore(world, {start, 0.0}, params);
    CHECK(log.completed);
    CHECK(log.coverage() >= 0.95);
    const auto reachable = reachable_free_cells(world, start);
    std::size_t pocket_free = 0, pocket_known = 0;
    for (std::size_t i = 0; i < world.size(); ++i) {
      if (world.cells()[i] != CellState::free) continue;
      const auto c = world.cell(i);
      if (std::find(reachable.begin(), reachable.end(), c) != reachable.end()) continue;
      ++pocket_free;
      pocket_known += log.final_map.at(c) != CellState::unknown;
    }
    CHECK(pocket_free > 0);
    CHECK(pocket_known == 0);
  }
  SUBCASE("replanning does not stall the robot") {
    const auto world = load_world_file(world_path("u_shape.txt"));
    params.max_range = 1.0;
    const auto log = explore(world, {world.cell_center({5, 5}), 0.0}, params);
    CHECK(log.completed);
    CHECK(log.min_barrier >= -1e-6);
    std::size_t checked = 0;
    for (const auto& cyc : log.cycles) {
      if (cyc.index == 0 || !cyc.first_speed) continue;
      const auto it = std::find_if(log.samples.begin(), log.samples.end(),
                                   [&](const ExploreSample& s) { return s.cycle == cyc.index && s.s_star; });
      REQUIRE(it != log.samples.end());
      const Vec2 x = it->state.head<2>();
      const Vec2 g = cyc.path.at(*it->s_star);
      const double v_ref = -params.corridor.kappa * heading_vector(it->state[2]).dot(x - g);
      if (std::abs(v_ref) > 1e-6) {
        CHECK(std::abs(*cyc.first_speed) > 0.0);
        ++checked;
      }
    }
    CHECK(checked > 0);
  }
  SUBCASE("log directory") {
    const auto room = load_world_file(world_path("room.txt"));
    const auto log = explore(room, {room_centre(room), 0.0}, params);
    const auto dir = std::filesystem::temp_directory_path() / "cbc_explore_log_test";
    std::filesystem::remove_all(dir);
    write_exploration_log(log, params, dir);
    CHECK(std::filesystem::exists(dir / "summary.json"));
    CHECK(std::filesystem::exists(dir / "trajectory.csv"));
    CHECK(std::filesystem::exists(dir / "final_map.txt"));
    for (const auto& c : log.cycles) {
      CHECK(std::filesystem::exists(dir / ("map_" + std::string(3 - std::to_string(c.index).size(), '0') +
                                           std::to_string(c.index) + ".txt")));
    }
    std::ifstream in(dir / "trajectory.csv");
    const auto table = read_csv(in);
    CHECK(table.rows.size() == log.samples.size());
    std::filesystem::remove_all(dir);
  }
  SUBCASE("start inside an obstacle") {
    const auto room = load_world_file(world_path("room.txt"));
    CHECK_THROWS((void)explore(room, {room.cell_center({0, 0}), 0.0}, params));
  }
}
