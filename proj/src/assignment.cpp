#include "stv/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stv/error.hpp"

namespace stv {

namespace {

// Potentials-based O(n²m) solver for n <= m; returns the column of each row.
std::vector<int> hungarian_wide(const std::vector<double>& a, std::size_t n, std::size_t m) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j]) row_to_col[p[j] - 1] = static_cast<int>(j - 1);
  return row_to_col;
}

double assignment_cost(const std::vector<double>& cost, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) return 0.0;
  const auto a = hungarian(cost, rows, cols);
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i)
    if (a[i] >= 0) total += cost[i * cols + static_cast<std::size_t>(a[i])];
  return total;
}

}  // namespace

std::vector<int> hungarian(const std::vector<double>& cost, std::size_t rows, std::size_t cols) {
  if (cost.size() != rows * cols) throw Error("shape_mismatch", "cost matrix size does not match rows×cols");
  for (double c : cost)
    if (!std::isfinite(c)) throw Error("non_finite", "cost matrix contains a non-finite entry");
  if (rows == 0 || cols == 0) return std::vector<int>(rows, -1);
  if (rows <= cols) return hungarian_wide(cost, rows, cols);
  std::vector<double> t(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = cost[i * cols + j];
  const auto col_to_row = hungarian_wide(t, cols, rows);
  std::vector<int> row_to_col(rows, -1);
  for (std::size_t j = 0; j < cols; ++j)
    if (col_to_row[j] >= 0) row_to_col[static_cast<std::size_t>(col_to_row[j])] = static_cast<int>(j);
  return row_to_col;
}

std::vector<std::pair<std::size_t, std::size_t>> match(const CostMatrix& m) {
  const std::size_t R = m.rows, C = m.cols;
  if (m.cost.size() != R * C) throw Error("shape_mismatch", "cost matrix size does not match rows×cols");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (R == 0 || C == 0) return pairs;

  // Square (R+C) problem: each row has a private "unmatched" column and each
  // column a private "unmatched" row. Feasible pairs earn a bonus larger than
  // any total cost, so cardinality is maximized first.
  double worst = 0.0;
  for (std::size_t i = 0; i < R * C; ++i) {
    if (!std::isfinite(m.cost[i])) throw Error("non_finite", "cost matrix contains a non-finite entry");
    worst = std::max(worst, std::abs(m.cost[i]));
  }
  const double bonus = 2.0 * (worst + 1.0) * static_cast<double>(std::min(R, C) + 1);
  const double blocked = bonus * static_cast<double>(R + C + 1);
  const std::size_t N = R + C;
  std::vector<double> full(N * N, 0.0);
  for (std::size_t i = 0; i < R; ++i) {
    for (std::size_t j = 0; j < C; ++j) full[i * N + j] = m.allowed(i, j) ? m.at(i, j) - bonus : blocked;
    for (std::size_t k = 0; k < R; ++k) full[i * N + C + k] = k == i ? 0.0 : blocked;
  }
  for (std::size_t j = 0; j < C; ++j)
    for (std::size_t k = 0; k < C; ++k) full[(R + j) * N + k] = k == j ? 0.0 : blocked;

  // Optimal cost over rows [first, N) and the given free columns.
  auto rest_cost = [&](std::size_t first, const std::vector<std::size_t>& free_cols) {
    const std::size_t n = N - first;
    std::vector<double> sub(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) sub[i * n + j] = full[(first + i) * N + free_cols[j]];
    return assignment_cost(sub, n, n);
  };

  std::vector<std::size_t> cols(N);
  for (std::size_t j = 0; j < N; ++j) cols[j] = j;
  const double optimum = rest_cost(0, cols);
  const double tol = 1e-9 * std::max(1.0, std::abs(optimum));
  double fixed = 0.0;

  // Rows in order. Free columns stay sorted, so real columns are tried
  // ascending before the row's own unmatched column C + r.
  for (std::size_t r = 0; r < R; ++r) {
    bool placed = false;
    for (std::size_t k = 0; k < cols.size() && !placed; ++k) {
      const std::size_t c = cols[k];
      const bool real = c < C && m.allowed(r, c);
      if (!real && c != C + r) continue;
      std::vector<std::size_t> remaining = cols;
      remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(k));
      const double value = full[r * N + c];
      if (fixed + value + rest_cost(r + 1, remaining) <= optimum + tol) {
        fixed += value;
        if (real) pairs.emplace_back(r, c);
        cols = std::move(remaining);
        placed = true;
      }
    }
    if (!placed) throw Error("internal", "assignment tie-break found no completion");
  }
  return pairs;
}

}  // namespace stv
