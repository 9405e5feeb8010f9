#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace stv {

/// Row-major rows×cols cost matrix.
struct CostMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> cost;
  std::vector<bool> feasible;  // empty means every pair is allowed

  CostMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), cost(r * c, 0.0), feasible(r * c, true) {}
  double& at(std::size_t i, std::size_t j) { return cost[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return cost[i * cols + j]; }
  bool allowed(std::size_t i, std::size_t j) const { return feasible.empty() || feasible[i * cols + j]; }
};

/// Minimum-cost assignment of min(rows, cols) pairs (Hungarian method).
/// Returns the column assigned to each row, or -1.
std::vector<int> hungarian(const std::vector<double>& cost, std::size_t rows, std::size_t cols);

/// Matches the largest number of feasible pairs, then the smallest total
/// cost among those. Ties are broken lexicographically: rows are fixed in
/// order, each to the smallest column that still admits an optimal
/// completion, with "unmatched" considered last. Pairs are sorted by row.
std::vector<std::pair<std::size_t, std::size_t>> match(const CostMatrix& m);

}  // namespace stv
