#pragma once

// Uniform-grid domain decomposition for neighbor queries, with the
// exhaustive O(N^2) pair scan kept alongside as the reference.

#include "swarmfault/world.hpp"

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace swarmfault {

using PairList = std::vector<AgentPair>;

struct CellCoord {
  std::int32_t x = 0;
  std::int32_t y = 0;
  bool operator==(const CellCoord&) const = default;
};

struct CellCoordHash {
  std::size_t operator()(const CellCoord& c) const noexcept {
    const auto ux = static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.x));
    const auto uy = static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.y));
    // splitmix64 finalizer: neighboring cells land in unrelated buckets
    std::uint64_t z = (ux << 32) | uy;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return static_cast<std::size_t>(z ^ (z >> 31));
  }
};

class UniformGrid {
 public:
  using CellMap = std::unordered_map<CellCoord, std::vector<int>, CellCoordHash>;

  /// Registers every position in exactly one cell. Throws
  /// std::invalid_argument when cell_size <= 0 or a position is not finite.
  static UniformGrid build(std::span<const Vec2> positions, double cell_size);

  double cell_size() const { return cell_size_; }
  const CellMap& cells() const { return cells_; }
  const std::vector<Vec2>& positions() const { return positions_; }
  CellCoord cell_of(const Vec2& p) const;
  std::size_t size() const { return positions_.size(); }

 private:
  double cell_size_ = 1.0;
  std::vector<Vec2> positions_;
  CellMap cells_;
};

/// Pairs (i < j, sorted) with center distance <= cutoff, found by scanning
/// each agent's 3x3 cell neighborhood. Throws std::invalid_argument when
/// cutoff exceeds the cell size.
PairList near_pairs(const UniformGrid& grid, double cutoff);

/// Exhaustive reference: every pair with distance <= cutoff, sorted.
PairList brute_force_pairs(std::span<const Vec2> positions, double cutoff);

struct BenchRow {
  int n = 0;
  double grid_median_ns = 0.0;
  double naive_median_ns = 0.0;
  std::size_t pair_count = 0;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  double grid_slope = 0.0;   // fitted log-log exponent
  double naive_slope = 0.0;
};

struct BenchOptions {
  double density = 0.25;   // agents per unit area, held constant across N
  double cutoff = 1.0;     // contact distance for unit-diameter disks
  std::uint64_t seed = 1;
};

/// Times grid build + query against the exhaustive scan for each N (ascending),
/// reporting medians over `repetitions`.
BenchResult bench_scaling(std::span<const int> ns, int repetitions, const BenchOptions& options = {});

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace swarmfault
