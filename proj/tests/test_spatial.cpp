#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"
#include "swarmfault/spatial_index.hpp"

#include <random>

using namespace swarmfault;

namespace {

std::vector<Vec2> random_points(std::mt19937_64& rng, int n, double side) {
  std::uniform_real_distribution<double> u(0.0, side);
  std::vector<Vec2> pts(n);
  for (auto& p : pts) p = Vec2(u(rng), u(rng));
  return pts;
}

}  // namespace

TEST_CASE("grid: every position lands in exactly one cell") {
  std::mt19937_64 rng(1);
  const auto pts = random_points(rng, 500, 20.0);
  const auto grid = UniformGrid::build(pts, 1.0);
  std::vector<int> seen(pts.size(), 0);
  for (const auto& [cell, members] : grid.cells())
    for (int i : members) {
      ++seen[i];
      CHECK(grid.cell_of(pts[i]) == cell);
    }
  for (int s : seen) CHECK(s == 1);
}

TEST_CASE("grid: near pairs equal the definition on random configurations") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 120);
    const double side = 1.0 + static_cast<double>(rng() % 30);
    const auto pts = random_points(rng, n, side);
    const double cutoff = 0.25 + 0.75 * static_cast<double>(rng() % 100) / 100.0;
    const auto grid = UniformGrid::build(pts, 1.0);
    CHECK(near_pairs(grid, cutoff) == oracle::pairs_by_definition(pts, cutoff));
    CHECK(brute_force_pairs(pts, cutoff) == oracle::pairs_by_definition(pts, cutoff));
  }
}

TEST_CASE("grid: negative coordinates and points on cell borders") {
  const std::vector<Vec2> pts = {{-1.0, -1.0}, {-0.0, -1.0}, {0.0, 0.0}, {1.0, 0.0}, {2.0, 2.0}, {-3.5, 7.25}};
  const auto grid = UniformGrid::build(pts, 1.0);
  CHECK(near_pairs(grid, 1.0) == oracle::pairs_by_definition(pts, 1.0));
}

TEST_CASE("grid: rejects invalid parameters") {
  const std::vector<Vec2> pts = {{0.0, 0.0}};
  CHECK_THROWS_AS(UniformGrid::build(pts, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(UniformGrid::build(pts, -1.0), std::invalid_argument);
  const std::vector<Vec2> bad = {{std::nan(""), 0.0}};
  CHECK_THROWS_AS(UniformGrid::build(bad, 1.0), std::invalid_argument);
  const auto grid = UniformGrid::build(pts, 1.0);
  CHECK_THROWS_AS(near_pairs(grid, 1.5), std::invalid_argument);
  CHECK(near_pairs(UniformGrid::build(std::vector<Vec2>{}, 1.0), 1.0).empty());
}

TEST_CASE("loglog_slope: recovers power laws") {
  const std::vector<double> x = {1e3, 2e3, 4e3, 8e3};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * v * v);
  CHECK(loglog_slope(x, y) == doctest::Approx(2.0));
  for (auto& v : y) v = std::sqrt(v);
  CHECK(loglog_slope(x, y) == doctest::Approx(1.0));
  CHECK_THROWS(loglog_slope(std::vector<double>{1.0}, std::vector<double>{1.0}));
}

TEST_CASE("bench: small run reports every size") {
  const std::vector<int> ns = {200, 400};
  const auto res = bench_scaling(ns, 1);
  REQUIRE(res.rows.size() == 2);
  CHECK(res.rows[0].n == 200);
  CHECK(res.rows[1].grid_median_ns > 0.0);
  CHECK(res.rows[1].naive_median_ns > 0.0);
}
