#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "waydcm/errors.hpp"
#include "waydcm/grid.hpp"

using namespace waydcm;
using test::straight_track;

TEST_CASE("outer radius follows reach_scale * v * horizon with a floor") {
  const RadialGrid fast = build_grid(10.0, 3.0);
  CHECK(fast.maxl == doctest::Approx(45.0).epsilon(1e-12));

  const RadialGrid stopped = build_grid(0.0, 3.0);
  CHECK(stopped.maxl == doctest::Approx(2.0).epsilon(1e-12));  // min_maxl floor

  GridSpec spec;
  spec.min_maxl = 7.5;
  const RadialGrid slow = build_grid(1.0, 2.0, spec);  // 1.5*1*2 = 3 < 7.5
  CHECK(slow.maxl == doctest::Approx(7.5).epsilon(1e-12));
}

TEST_CASE("alternatives enumerate sector-major with the documented geometry") {
  GridSpec spec;  // 5 sectors x 3 rings over pi
  const RadialGrid grid = build_grid(10.0, 3.0, spec);
  REQUIRE(grid.alts.size() == 15);

  const double width = spec.span / double(spec.k_sectors);
  for (std::size_t s = 0; s < spec.k_sectors; ++s)
    for (std::size_t r = 0; r < spec.k_rings; ++r) {
      const std::size_t k = s * spec.k_rings + r;
      const Alternative& a = grid.alts[k];
      CHECK(a.k == k);
      CHECK(a.sector == s);
      CHECK(a.ring == r);
      const double mid = -spec.span / 2.0 + (double(s) + 0.5) * width;
      CHECK(std::abs(a.mid - mid) < 1e-12);
      CHECK(std::abs(a.d_left - (mid + width / 2.0)) < 1e-12);
      CHECK(std::abs(a.d_right - (mid - width / 2.0)) < 1e-12);
      CHECK(a.d_left > a.d_right);
      const double radius = grid.maxl * double(r + 1) / double(spec.k_rings);
      CHECK(std::abs(a.radius - radius) < 1e-12);
      CHECK(std::abs(a.center.x - radius * std::cos(mid)) < 1e-12);
      CHECK(std::abs(a.center.y - radius * std::sin(mid)) < 1e-12);
    }
}

TEST_CASE("every center lies within the outer radius") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    GridSpec spec;
    spec.k_sectors = 1 + rng.uniform_int(8);
    spec.k_rings = 1 + rng.uniform_int(5);
    if (spec.k_total() < 2) spec.k_rings = 2;
    spec.span = rng.uniform(0.5, 2.0 * kPi);
    const RadialGrid grid = build_grid(rng.uniform(0.0, 20.0), rng.uniform(0.5, 5.0), spec);
    CHECK(grid.alts.size() == spec.k_total());
    for (const auto& a : grid.alts) {
      CHECK(a.center.norm() <= grid.maxl * (1.0 + 1e-12));
      CHECK(std::abs(a.center.norm() - a.radius) < 1e-12);
    }
  }
}

TEST_CASE("building the same grid twice is exact") {
  const RadialGrid a = build_grid(7.3, 1.2);
  const RadialGrid b = build_grid(7.3, 1.2);
  REQUIRE(a.alts.size() == b.alts.size());
  CHECK(a.maxl == b.maxl);
  for (std::size_t k = 0; k < a.alts.size(); ++k) {
    CHECK(a.alts[k].center.x == b.alts[k].center.x);
    CHECK(a.alts[k].center.y == b.alts[k].center.y);
    CHECK(a.alts[k].mid == b.alts[k].mid);
  }
}

TEST_CASE("scene overload uses the speed at the end of the history") {
  Scene s;
  s.t_obs = 4;
  s.t_f = 30;
  s.dt = 0.1;
  s.target = straight_track("t", {0.0, 0.0}, 10.0, 0.0, 4, 0.1);
  const RadialGrid g = build_grid(s);
  CHECK(g.maxl == doctest::Approx(1.5 * 10.0 * 3.0).epsilon(1e-12));
}

TEST_CASE("ground-truth label picks the nearest center") {
  const RadialGrid grid = build_grid(10.0, 3.0);
  Scene s;
  s.t_obs = 1;
  s.t_f = 1;
  s.target = straight_track("t", {0.0, 0.0}, 10.0, 0.0, 1, 0.1);

  SUBCASE("endpoint exactly on a center") {
    for (std::size_t k = 0; k < grid.alts.size(); ++k) {
      s.future = std::vector<Vec2>{grid.alts[k].center};
      CHECK(label_ground_truth(grid, s) == k);
    }
  }

  SUBCASE("exact tie resolves to the lowest index") {
    // The straight-ahead sector's centers sit exactly on the x-axis at
    // 15, 30 and 45 m, so (22.5, 0) ties alternatives 6 and 7 exactly.
    REQUIRE(grid.alts[6].center.x == 15.0);
    REQUIRE(grid.alts[6].center.y == 0.0);
    REQUIRE(grid.alts[7].center.x == 30.0);
    const Vec2 m{22.5, 0.0};
    REQUIRE(distance(m, grid.alts[6].center) == distance(m, grid.alts[7].center));
    s.future = std::vector<Vec2>{m};
    CHECK(label_ground_truth(grid, s) == 6);
  }

  SUBCASE("matches a brute-force scan on random endpoints") {
    Rng rng(613);
    for (int trial = 0; trial < 500; ++trial) {
      const Vec2 p{rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0)};
      s.future = std::vector<Vec2>{p};
      std::size_t best = 0;
      double best_d = distance(p, grid.alts[0].center);
      for (std::size_t k = 1; k < grid.alts.size(); ++k) {
        const double d = distance(p, grid.alts[k].center);
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      CHECK(label_ground_truth(grid, s) == best);
    }
  }

  SUBCASE("missing future is rejected") {
    s.future.reset();
    CHECK_THROWS_AS(label_ground_truth(grid, s), DataError);
  }
}

TEST_CASE("goal encoder inputs are the centers in alternative order") {
  const RadialGrid grid = build_grid(8.0, 2.0);
  const auto centers = goal_embedding_inputs(grid);
  REQUIRE(centers.size() == grid.alts.size());
  for (std::size_t k = 0; k < centers.size(); ++k) {
    CHECK(centers[k].x == grid.alts[k].center.x);
    CHECK(centers[k].y == grid.alts[k].center.y);
  }
}

TEST_CASE("degenerate grid specs are rejected") {
  GridSpec zero_sectors;
  zero_sectors.k_sectors = 0;
  CHECK_THROWS_AS(build_grid(5.0, 2.0, zero_sectors), ConfigError);

  GridSpec single;
  single.k_sectors = 1;
  single.k_rings = 1;
  CHECK_THROWS_AS(build_grid(5.0, 2.0, single), ConfigError);

  GridSpec wide;
  wide.span = 2.5 * kPi;
  CHECK_THROWS_AS(build_grid(5.0, 2.0, wide), ConfigError);

  GridSpec no_floor;
  no_floor.min_maxl = 0.0;
  CHECK_THROWS_AS(build_grid(5.0, 2.0, no_floor), ConfigError);
}
