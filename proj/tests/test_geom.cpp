#include <doctest.h>

#include <sstream>

#include "cbc/barriers.hpp"
#include "cbc/corridor.hpp"
#include "cbc/geom.hpp"
#include "support.hpp"

using namespace cbc;
using cbc::test::Rng;

namespace {

Halfspace hs(double n1, double n2, double offset) { return {Vec2(n1, n2), offset}; }

Corridor corridor_of(std::vector<Halfspace> h) {
  Corridor c;
  c.anchor = Vec2::Zero();
  c.halfspaces = std::move(h);
  return c;
}

// The q = (2, 0), r = 1, p = 1 scene at x = 0 with alpha = kappa = 1.
Corridor reference_scene() {
  const auto fam = BarrierFamily::power_distance({Vec2(2, 0)}, 1.0, 1.0);
  return bc_full(fam, Vec2::Zero(), {1.0, 1.0, 0.0});
}

}  // namespace

TEST_CASE("membership in an empty corridor is vacuous") {
  const auto c = corridor_of({});
  CHECK(corridor_contains(c, Vec2(1e6, -3)));
}

TEST_CASE("reference scene membership reduces to g1 <= 1") {
  const auto c = reference_scene();
  CHECK(corridor_contains(c, Vec2(1, 0)));
  CHECK_FALSE(corridor_contains(c, Vec2(1.5, 3)));
  CHECK(corridor_contains(c, c.anchor));
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const Vec2 g = rng.point(-4, 4);
    if (std::abs(g.x() - 1.0) < 1e-9) continue;
    CHECK(corridor_contains(c, g) == (g.x() <= 1.0));
  }
}

TEST_CASE("membership checks dimensions and scales tolerance by the normal") {
  const auto c = corridor_of({hs(1, 0, 1)});
  CHECK_THROWS_AS((void)corridor_contains(c, Vec::Zero(3)), DimensionMismatch);
  const auto big = corridor_of({hs(1e6, 0, 1e6)});
  CHECK(corridor_contains(big, Vec2(1.0 - 5e-10, 0)));
  CHECK_FALSE(corridor_contains(big, Vec2(1.0 - 5e-9, 0)));
}

TEST_CASE("zero normals are vacuous or infeasible") {
  CHECK(hs(0, 0, -1).degenerate());
  CHECK_FALSE(hs(0, 0, -1).infeasible());
  CHECK(hs(0, 0, 1).infeasible());
  CHECK(corridor_contains(corridor_of({hs(0, 0, -1)}), Vec2(3, 3)));
  CHECK_FALSE(corridor_contains(corridor_of({hs(0, 0, 1)}), Vec2(3, 3)));
}

TEST_CASE("clipping") {
  const Box box = Box::centered(Vec2::Zero(), 2.0);
  SUBCASE("no halfspaces gives the box") {
    const auto poly = clip_corridor_2d(corridor_of({}), box);
    CHECK(poly.size() == 4);
    CHECK(polygon_area(poly) == doctest::Approx(16.0));
  }
  SUBCASE("g1 <= 1 cuts an axis-aligned rectangle") {
    const auto poly = clip_corridor_2d(reference_scene(), box);
    CHECK(polygon_area(poly) == doctest::Approx(12.0));
    for (const auto& v : poly) {
      CHECK(v.x() <= 1.0 + 1e-12);
      CHECK(v.x() >= -2.0 - 1e-12);
    }
  }
  SUBCASE("opposing halfspaces leave nothing") {
    const auto poly = clip_corridor_2d(corridor_of({hs(1, 0, 1), hs(-1, 0, 1)}), box);
    CHECK(poly.empty());
  }
  SUBCASE("an infeasible zero normal leaves nothing") {
    auto c = corridor_of({hs(0, 0, 1)});
    CHECK(clip_corridor_2d(c, box).empty());
  }
}

TEST_CASE("property: clipped vertices and centroid are members, polygon is counterclockwise") {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Halfspace> h;
    const int m = rng.integer(0, 6);
    for (int i = 0; i < m; ++i) {
      const Vec2 n = rng.unit() * rng.uniform(0.1, 5.0);
      h.push_back({n, n.dot(rng.point(-1, 1)) - rng.uniform(0.0, 1.0)});
    }
    const auto c = corridor_of(h);
    const auto poly = clip_corridor_2d(c, Box::centered(rng.point(-0.5, 0.5), rng.uniform(0.5, 3)));
    if (poly.empty()) continue;
    for (const auto& v : poly) CHECK(corridor_contains(c, v, 1e-9));
    if (poly.size() >= 3) {
      CHECK(polygon_area(poly) >= 0.0);
      CHECK(corridor_contains(c, polygon_centroid(poly), 1e-9));
    }
  }
}

TEST_CASE("sampling") {
  const Box box = Box::centered(Vec2::Zero(), 2.0);
  SUBCASE("empty corridor fails") {
    CHECK_THROWS_AS((void)sample_corridor(corridor_of({hs(1, 0, 5)}), box, 3, 1), SamplingFailure);
  }
  SUBCASE("whole space returns points inside the box") {
    const auto pts = sample_corridor(corridor_of({}), box, 3, 1);
    REQUIRE(pts.size() == 3);
    for (const auto& p : pts) CHECK(p.cwiseAbs().maxCoeff() <= 2.0);
  }
  SUBCASE("reference scene samples satisfy the closed form") {
    for (const auto& p : sample_corridor(reference_scene(), box, 200, 9)) CHECK(p[0] <= 1.0);
  }
  SUBCASE("identical seeds give identical samples") {
    const auto a = sample_corridor(reference_scene(), box, 50, 42);
    const auto b = sample_corridor(reference_scene(), box, 50, 42);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i].array() == b[i].array()).all());
  }
}

TEST_CASE("property: convex combinations of members are members") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto scene = cbc::test::random_scene(rng, 6, 1.0);
    const auto c = bc_full(scene.family(), scene.x, {1.0, 1.0, 0.0});
    const auto pts = sample_corridor(c, Box::centered(scene.x, 3.0), 20,
                                     static_cast<std::uint64_t>(trial));
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const double t = rng.uniform(0, 1);
      CHECK(corridor_contains(c, t * pts[i] + (1 - t) * pts[i + 1]));
    }
  }
}

TEST_CASE("polygon dumps round-trip") {
  std::vector<Polygon> polys{{Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)}, {}, {Vec2(0.123456789, -2), Vec2(3, 4), Vec2(-1, 4)}};
  std::stringstream ss;
  write_polygons(ss, polys);
  const auto back = read_polygons(ss);
  REQUIRE(back.size() == 3);
  CHECK(back[1].empty());
  CHECK(back[2][0].x() == doctest::Approx(0.123456789).epsilon(1e-9));
}

TEST_CASE("lu_solve against a random system and a singular one") {
  Rng rng(8);
  for (int n = 1; n <= 6; ++n) {
    Mat a = Mat::Random(n, n) + n * Mat::Identity(n, n);
    Vec x = rng.vec(n, -1, 1);
    const Mat b = a * x;
    CHECK(cbc::test::rel_err(lu_solve(a, b), x) < 1e-10);
  }
  Mat s(2, 2);
  s << 1, 2, 2, 4;
  CHECK_THROWS_AS((void)lu_solve(s, Mat::Identity(2, 2)), SingularMatrix);
}
