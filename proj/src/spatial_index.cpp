#include "swarmfault/spatial_index.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>

namespace swarmfault {

CellCoord UniformGrid::cell_of(const Vec2& p) const {
  return {static_cast<std::int32_t>(std::floor(p.x() / cell_size_)),
          static_cast<std::int32_t>(std::floor(p.y() / cell_size_))};
}

UniformGrid UniformGrid::build(std::span<const Vec2> positions, double cell_size) {
  if (!(cell_size > 0.0)) throw std::invalid_argument("cell_size must be positive");
  UniformGrid g;
  g.cell_size_ = cell_size;
  g.positions_.assign(positions.begin(), positions.end());
  g.cells_.reserve(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (!positions[i].allFinite()) throw std::invalid_argument("non-finite position");
    g.cells_[g.cell_of(positions[i])].push_back(static_cast<int>(i));
  }
  return g;
}

PairList near_pairs(const UniformGrid& grid, double cutoff) {
  if (cutoff > grid.cell_size()) throw std::invalid_argument("cutoff exceeds cell size");
  const double cut2 = cutoff * cutoff;
  const auto& pos = grid.positions();
  // each unordered cell pair is visited once: the cell itself plus the four
  // neighbors ahead of it in (x, y) order
  constexpr int kAhead[4][2] = {{1, -1}, {1, 0}, {1, 1}, {0, 1}};
  PairList out;
  out.reserve(grid.size());
  auto emit = [&](int i, int j) {
    if ((pos[i] - pos[j]).squaredNorm() <= cut2) out.emplace_back(std::min(i, j), std::max(i, j));
  };
  for (const auto& [cell, members] : grid.cells()) {
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b) emit(members[a], members[b]);
    for (const auto& d : kAhead) {
      const auto it = grid.cells().find({cell.x + d[0], cell.y + d[1]});
      if (it == grid.cells().end()) continue;
      for (int i : members)
        for (int j : it->second) emit(i, j);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

PairList brute_force_pairs(std::span<const Vec2> positions, double cutoff) {
  const double cut2 = cutoff * cutoff;
  const int n = static_cast<int>(positions.size());
  PairList out;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if ((positions[i] - positions[j]).squaredNorm() <= cut2) out.emplace_back(i, j);
  return out;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("need at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

namespace {

template <typename F>
double median_ns(int reps, F&& f) {
  std::vector<double> t;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    t.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

}  // namespace

BenchResult bench_scaling(std::span<const int> ns, int repetitions, const BenchOptions& options) {
  if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  if (!std::is_sorted(ns.begin(), ns.end())) throw std::invalid_argument("N list must be ascending");
  BenchResult result;
  std::mt19937_64 rng(options.seed);
  for (int n : ns) {
    const double side = std::sqrt(static_cast<double>(n) / options.density);
    std::uniform_real_distribution<double> u(0.0, side);
    std::vector<Vec2> pts(n);
    for (auto& p : pts) p = Vec2(u(rng), u(rng));

    BenchRow row;
    row.n = n;
    std::size_t grid_pairs = 0, naive_pairs = 0;
    row.grid_median_ns = median_ns(repetitions, [&] {
      const auto grid = UniformGrid::build(pts, options.cutoff);
      grid_pairs = near_pairs(grid, options.cutoff).size();
    });
    row.naive_median_ns = median_ns(repetitions, [&] { naive_pairs = brute_force_pairs(pts, options.cutoff).size(); });
    if (grid_pairs != naive_pairs) throw std::logic_error("grid and exhaustive pair counts disagree");
    row.pair_count = grid_pairs;
    result.rows.push_back(row);
  }
  if (result.rows.size() >= 2) {
    std::vector<double> x, g, v;
    for (const auto& r : result.rows) {
      x.push_back(r.n);
      g.push_back(r.grid_median_ns);
      v.push_back(r.naive_median_ns);
    }
    result.grid_slope = loglog_slope(x, g);
    result.naive_slope = loglog_slope(x, v);
  }
  return result;
}

}  // namespace swarmfault
