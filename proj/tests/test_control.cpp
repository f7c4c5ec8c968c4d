#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cbc/control.hpp"
#include "support.hpp"

using namespace cbc;
using cbc::test::rel_err;
using cbc::test::Rng;

namespace {

constexpr double kPi = std::numbers::pi;

/// Exhaustive search over [-10, 10] with the given step.
double grid_scalar_qp(double vd, const std::vector<ScalarConstraint>& cons, double step, bool& found) {
  found = false;
  double best = INFINITY;
  const long n = std::lround(20.0 / step);
  for (long i = 0; i <= n; ++i) {
    const double v = -10.0 + step * static_cast<double>(i);
    bool ok = true;
    for (const auto& c : cons) ok = ok && c.a * v >= c.b;
    if (ok) {
      found = true;
      best = std::min(best, (v - vd) * (v - vd));
    }
  }
  return best;
}

double grid_planar_qp(const Vec2& ud, const std::vector<PlanarConstraint>& cons, double step, bool& found) {
  found = false;
  double best = INFINITY;
  const long n = std::lround(10.0 / step);
  for (long i = 0; i <= n; ++i) {
    const double u0 = -5.0 + step * static_cast<double>(i);
    for (long j = 0; j <= n; ++j) {
      const Vec2 u(u0, -5.0 + step * static_cast<double>(j));
      bool ok = true;
      for (const auto& c : cons) ok = ok && c.a.dot(u) >= c.b;
      if (ok) {
        found = true;
        best = std::min(best, (u - ud).squaredNorm());
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("angle wrapping") {
  CHECK(wrap_angle(kPi) == doctest::Approx(-kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(-kPi));
  CHECK(wrap_angle(3 * kPi / 2) == doctest::Approx(-kPi / 2));
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(-50, 50);
    const double w = wrap_angle(a);
    CHECK(w >= -kPi);
    CHECK(w < kPi);
    CHECK(std::abs(std::remainder(a - w, 2 * kPi)) < 1e-9);
  }
}

TEST_CASE("proportional control") {
  CHECK(proportional_control(Vec2(1, 2), Vec2(1, 2), 3.0).norm() == 0.0);
  CHECK(rel_err(proportional_control(Vec2(1, 0), Vec2(0, 0), 1.0), Vec2(-1, 0)) == 0.0);
}

TEST_CASE("unicycle reference control") {
  const UnicyclePose pose{Vec2(1, 1), 0.0};
  SUBCASE("straight ahead") {
    const auto u = unicycle_reference_control(pose, Vec2(3, 1), 1.5, 2.0);
    CHECK(u.v == doctest::Approx(3.0));
    CHECK(u.omega == 0.0);
  }
  SUBCASE("directly behind takes the -pi branch") {
    const auto u = unicycle_reference_control(pose, Vec2(-1, 1), 1.0, 2.0);
    CHECK(u.omega == doctest::Approx(-2.0 * kPi));
    CHECK(u.v == doctest::Approx(-2.0));
  }
  SUBCASE("ninety degrees left") {
    const auto u = unicycle_reference_control(pose, Vec2(1, 2), 1.0, 2.0);
    CHECK(u.omega == doctest::Approx(kPi));
    CHECK(std::abs(u.v) < 1e-15);
  }
  SUBCASE("at the goal") {
    const auto u = unicycle_reference_control(pose, Vec2(1, 1), 1.0, 2.0);
    CHECK(u.v == 0.0);
    CHECK(u.omega == 0.0);
  }
}

TEST_CASE("scalar QP") {
  CHECK(*scalar_qp(3.0, {}) == 3.0);
  const std::vector<ScalarConstraint> box{{1, -1}, {-1, -2}};  // v >= -1, v <= 2
  CHECK(*scalar_qp(5.0, box) == doctest::Approx(2.0));
  CHECK(*scalar_qp(-5.0, box) == doctest::Approx(-1.0));
  CHECK(*scalar_qp(0.5, box) == 0.5);
  const std::vector<ScalarConstraint> vacuous{{0, -1}};
  CHECK(*scalar_qp(4.0, vacuous) == 4.0);
  const std::vector<ScalarConstraint> impossible{{0, 1}};
  CHECK_FALSE(scalar_qp(4.0, impossible).has_value());
  CHECK_FALSE(scalar_feasible_interval(impossible).feasible());
  const std::vector<ScalarConstraint> crossed{{1, 2}, {-1, -1}};  // v >= 2, v <= 1
  CHECK_FALSE(scalar_qp(0.0, crossed).has_value());
}

TEST_CASE("property: scalar QP agrees with a grid search") {
  Rng rng(3);
  int compared = 0;
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<ScalarConstraint> cons;
    const int m = rng.integer(0, 4);
    for (int i = 0; i < m; ++i) cons.push_back({rng.uniform(-2, 2), rng.uniform(-4, 2)});
    const double vd = rng.uniform(-8, 8);
    const auto v = scalar_qp(vd, cons);
    bool found = false;
    const double oracle = grid_scalar_qp(vd, cons, 1e-3, found);
    // feasible sets thinner than the grid step can escape the oracle
    const auto iv = scalar_feasible_interval(cons);
    if (iv.feasible() && iv.lo > -9.9 && iv.hi < 9.9 && iv.hi - iv.lo < 2e-3) continue;
    if (iv.lo > 10 || iv.hi < -10) continue;
    CHECK(v.has_value() == found);
    if (v && found) {
      for (const auto& c : cons) CHECK(c.a * *v >= c.b - 1e-12);
      CHECK((*v - vd) * (*v - vd) <= oracle + 1e-12);
      // the grid optimum sits at most one step from the true optimum
      CHECK((*v - vd) * (*v - vd) >= oracle - (2.0 * std::sqrt(oracle) * 1e-3 + 1e-6));
      ++compared;
    }
  }
  CHECK(compared > 100);
}

TEST_CASE("planar QP filter") {
  CHECK(rel_err(*qp_filter_2d(Vec2(0.3, 0.4), {}), Vec2(0.3, 0.4)) == 0.0);
  const std::vector<PlanarConstraint> half{{Vec2(1, 0), 1.0}};
  CHECK(rel_err(*qp_filter_2d(Vec2(0, 0), half), Vec2(1, 0)) < 1e-15);
  const std::vector<PlanarConstraint> wedge{{Vec2(1, 0), 1.0}, {Vec2(0, 1), 2.0}};
  CHECK(rel_err(*qp_filter_2d(Vec2(0, 0), wedge), Vec2(1, 2)) < 1e-14);
  const std::vector<PlanarConstraint> none{{Vec2(1, 0), 1.0}, {Vec2(-1, 0), 1.0}};
  CHECK_FALSE(qp_filter_2d(Vec2(0, 0), none).has_value());
}

TEST_CASE("property: planar QP filter agrees with a grid search") {
  Rng rng(5);
  int compared = 0;
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<PlanarConstraint> cons;
    const int m = rng.integer(1, 6);
    const Vec2 inside = rng.point(-3, 3);
    for (int i = 0; i < m; ++i) {
      const Vec2 a = rng.unit() * rng.uniform(0.5, 2);
      cons.push_back({a, a.dot(inside) - rng.uniform(0.2, 2)});
    }
    const Vec2 ud = rng.point(-4, 4);
    const auto u = qp_filter_2d(ud, cons);
    bool found = false;
    const double oracle = grid_planar_qp(ud, cons, 1e-2, found);
    REQUIRE(u.has_value());
    REQUIRE(found);
    for (const auto& c : cons) CHECK(c.a.dot(*u) >= c.b - 1e-9);
    // the grid optimum is within one diagonal cell of the true optimum
    CHECK((*u - ud).squaredNorm() <= oracle + 1e-12);
    CHECK((*u - ud).squaredNorm() >= oracle - (2.0 * std::sqrt(oracle) * 1.5e-2 + 1e-3));
    ++compared;
  }
  CHECK(compared == 40);
}

TEST_CASE("the planar filter leaves corridor-member goals unchanged") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = cbc::test::random_scene(rng, 8, 1.0);
    const auto fam = s.family();
    const auto c = bc_full(fam, s.x, {1, 1, 0});
    for (const auto& g : sample_corridor(c, Box::centered(s.x, 3), 5, 1)) {
      std::vector<PlanarConstraint> cons;
      for (std::size_t i = 0; i < fam.size(); ++i) {
        cons.push_back({fam[i].gradient(s.x), -fam[i].value(s.x)});
      }
      const Vec2 ud = proportional_control(s.x, g, 1.0);
      CHECK(rel_err(*qp_filter_2d(ud, cons), ud) < 1e-12);
    }
  }
}

TEST_CASE("safe unicycle velocity") {
  const CorridorParams params{1, 1, 0.25};
  SUBCASE("without barriers the reference velocity passes") {
    const UnicyclePose pose{Vec2(0, 0), 0.3};
    const auto u = safe_unicycle_velocity(pose, Vec2(2, 1), BarrierFamily{}, params, 2.0);
    const auto ref = unicycle_reference_control(pose, Vec2(2, 1), 1.0, 2.0);
    CHECK(u.v == doctest::Approx(ref.v));
    CHECK(u.omega == doctest::Approx(ref.omega));
  }
  SUBCASE("reference scene") {
    const auto fam = BarrierFamily::power_distance({Vec2(2, 0)}, 1.0, 1.0);
    const auto u = safe_unicycle_velocity({Vec2(0, 0), 0.0}, Vec2(0.5, 0), fam, params, 2.0);
    CHECK(u.v == doctest::Approx(0.5));
  }
  SUBCASE("preconditions") {
    const auto fam = BarrierFamily::power_distance({Vec2(2, 0)}, 1.0, 1.0);
    CHECK_THROWS_AS((void)safe_unicycle_velocity({Vec2(1.5, 0), 0.0}, Vec2(0, 0), fam, params, 2.0),
                    PreconditionViolated);
    CHECK_THROWS_AS((void)safe_unicycle_velocity({Vec2(0, 0), 0.0}, Vec2(0.9, 0), fam, params, 2.0),
                    PreconditionViolated);
  }
  SUBCASE("property: the velocity is feasible and optimal against a grid") {
    Rng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
      const auto s = cbc::test::random_scene(rng, 6, rng.integer(0, 1) ? 1.0 : 2.0, 0.3);
      const auto fam = s.family();
      const CorridorParams prm{rng.uniform(0.5, 2), rng.uniform(0.5, 2), 0.05};
      const auto c = bc_full(fam, s.x, prm, AnchorCheck::allow_unsafe);
      if (fam.min_value(s.x) < prm.epsilon) continue;
      const auto goals = sample_corridor(c, Box::centered(s.x, 2), 1, static_cast<std::uint64_t>(trial));
      const UnicyclePose pose{s.x, rng.uniform(-kPi, kPi)};
      const Vec2 g = goals[0];
      const auto u = safe_unicycle_velocity(pose, g, fam, prm, 2.0);
      // constraints written out from their definitions
      const Vec2 o = heading_vector(pose.heading);
      std::vector<ScalarConstraint> cons;
      for (std::size_t i = 0; i < fam.size(); ++i) {
        const auto e = fam[i].evaluate(s.x, true);
        cons.push_back({e.gradient.dot(o), -prm.alpha_rate * e.value});
        const auto ge = goal_barrier_eval(e, s.x, g, prm.kappa, prm.alpha_rate, prm.epsilon);
        cons.push_back({ge.gradient.dot(o), -prm.alpha_rate * ge.value});
      }
      for (const auto& cn : cons) CHECK(cn.a * u.v >= cn.b - 1e-9);
      const double vd = -prm.kappa * o.dot(s.x - g);
      bool found = false;
      const double oracle = grid_scalar_qp(vd, cons, 1e-4, found);
      REQUIRE(found);
      CHECK(std::abs((u.v - vd) * (u.v - vd) - oracle) <= 2.0 * std::sqrt(oracle) * 1e-4 + 1e-8);
    }
  }
}

TEST_CASE("output regulation gains") {
  SUBCASE("double integrator") {
    Mat a(2, 2), b(2, 1), c(1, 2);
    a << 0, 1, 0, 0;
    b << 0, 1;
    c << 1, 0;
    const auto gains = output_regulation_gains(a, b, c);
    CHECK(rel_err(gains.x_map, (Mat(2, 1) << 1, 0).finished()) < 1e-15);
    CHECK(gains.u_map.norm() < 1e-15);
  }
  SUBCASE("identity input and output") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = rng.integer(1, 5);
      Mat a = Mat::Random(n, n) - 3.0 * n * Mat::Identity(n, n);
      const auto gains = output_regulation_gains(a, Mat::Identity(n, n), Mat::Identity(n, n));
      CHECK(rel_err(gains.x_map, Mat::Identity(n, n)) < 1e-12);
      CHECK(rel_err(gains.u_map, -a) < 1e-12);
    }
  }
  SUBCASE("singular block") {
    Mat a(2, 2), b(2, 1), c(1, 2);
    a << 0, 1, 0, 0;
    b << 0, 1;
    c << 0, 0;
    CHECK_THROWS_AS((void)output_regulation_gains(a, b, c), SingularBlock);
  }
}

TEST_CASE("linear plant and regulation control") {
  Mat a(2, 2), b(2, 1), c(1, 2), k(1, 2);
  a << 0, 1, 0, 0;
  b << 0, 1;
  c << 1, 0;
  k << -1, -2;
  const auto plant = LinearPlant::make(a, b, c, k);
  CHECK((plant.c * plant.x_map - Mat::Identity(1, 1)).norm() < 1e-10);
  CHECK((plant.a * plant.x_map + plant.b * plant.u_map).norm() < 1e-10);
  const Vec y = Vec::Constant(1, 0.7);
  CHECK(rel_err(output_regulation_control(plant.x_map * y, y, plant), plant.u_map * y) < 1e-15);
  const Vec x = Vec2(0.3, -1.1);
  CHECK(rel_err(output_regulation_control(x, Vec::Zero(1), plant), k * x) < 1e-15);
  Mat bad(1, 2);
  bad << 1, 1;
  CHECK_THROWS_AS((void)LinearPlant::make(a, b, c, bad), NotHurwitz);
}
