#include "pmatch/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "pmatch/error.hpp"
#include "pmatch/kernels.hpp"

namespace pmatch {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

// Shortest augmenting path with row/column potentials over a dense cost
// accessor (minimization). Returns the column of each row.
template <typename Cost>
std::vector<std::uint32_t> min_cost_assignment(std::size_t n, Cost&& cost) {
  // 1-based arrays; column 0 is the virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
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
    } while (j0 != 0);
  }
  std::vector<std::uint32_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = static_cast<std::uint32_t>(j - 1);
  return row_to_col;
}

// Sparse successive shortest paths with column prices. Every free row runs a
// heap-based Dijkstra over retained edges and stops at the first free column.
// Returns false when some row has no augmenting path (no perfect matching).
bool sparse_min_cost_assignment(const SparseScoreMatrix& m, std::vector<std::uint32_t>& row_to_col) {
  const std::size_t n = m.n;
  std::vector<double> price(n, 0.0), dist(n, kInf);
  std::vector<std::uint32_t> col_to_row(n, kNone), pred(n, kNone);
  std::vector<std::uint64_t> seen(n, 0), done(n, 0);
  std::vector<std::uint32_t> scanned;
  row_to_col.assign(n, kNone);
  using Item = std::pair<double, std::uint32_t>;

  auto cost_of = [&](std::uint32_t row, std::uint32_t col) -> double {
    for (const auto& e : m.rows[row]) {
      if (e.col == col) return -e.score;
    }
    return kInf;
  };

  for (std::uint32_t start = 0; start < n; ++start) {
    const std::uint64_t stamp = start + 1;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    scanned.clear();
    auto relax = [&](std::uint32_t row, double base) {
      for (const auto& e : m.rows[row]) {
        const std::uint32_t j = e.col;
        if (done[j] == stamp) continue;
        const double nd = base + (-e.score - price[j]);
        if (seen[j] != stamp || nd < dist[j]) {
          seen[j] = stamp;
          dist[j] = nd;
          pred[j] = row;
          heap.emplace(nd, j);
        }
      }
    };
    relax(start, 0.0);

    std::uint32_t terminal = kNone;
    double final_dist = 0.0;
    while (!heap.empty()) {
      const auto [d, j] = heap.top();
      heap.pop();
      if (done[j] == stamp || d > dist[j]) continue;
      done[j] = stamp;
      scanned.push_back(j);
      if (col_to_row[j] == kNone) {
        terminal = j;
        final_dist = d;
        break;
      }
      const std::uint32_t r = col_to_row[j];
      // Matched edges have the smallest reduced cost in their row.
      relax(r, d - (cost_of(r, j) - price[j]));
    }
    if (terminal == kNone) return false;

    for (std::uint32_t j : scanned) price[j] += dist[j] - final_dist;
    for (std::uint32_t j = terminal;;) {
      const std::uint32_t r = pred[j];
      const std::uint32_t previous = row_to_col[r];
      row_to_col[r] = j;
      col_to_row[j] = r;
      if (r == start) break;
      j = previous;
    }
  }
  return true;
}

}  // namespace

bool Assignment::is_permutation() const {
  std::vector<std::uint32_t> sorted = proof_of;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] != i) return false;
  }
  return true;
}

Assignment Assignment::identity(std::size_t n) {
  Assignment a;
  a.proof_of.resize(n);
  std::iota(a.proof_of.begin(), a.proof_of.end(), 0u);
  return a;
}

double assignment_score(const Matrix& scores, const Assignment& assignment) {
  double total = 0.0;
  for (std::size_t i = 0; i < assignment.size(); ++i) total += scores(i, assignment.proof_of[i]);
  return total;
}

AssignmentResult solve_brute(const Matrix& scores) {
  const std::size_t n = scores.rows();
  if (scores.cols() != n) throw Error(ErrorCode::SizeMismatch, "score matrix must be square");
  if (n > kBruteForceLimit) throw Error(ErrorCode::TooLarge, "brute force is limited to n <= 9");
  Assignment perm = Assignment::identity(n);
  AssignmentResult best{perm, assignment_score(scores, perm)};
  while (std::next_permutation(perm.proof_of.begin(), perm.proof_of.end())) {
    const double total = assignment_score(scores, perm);
    if (total > best.objective) best = {perm, total};
  }
  return best;
}

AssignmentResult solve_dense(const Matrix& scores) {
  const std::size_t n = scores.rows();
  if (scores.cols() != n) throw Error(ErrorCode::SizeMismatch, "score matrix must be square");
  AssignmentResult result;
  result.assignment.proof_of =
      min_cost_assignment(n, [&](std::size_t i, std::size_t j) { return -scores(i, j); });
  result.objective = assignment_score(scores, result.assignment);
  return result;
}

SparseScoreMatrix prune_topk(const Matrix& scores, std::size_t k) { return kernels::prune_topk_parallel(scores, k); }

SparseAssignmentResult solve_sparse(const SparseScoreMatrix& scores) {
  const std::size_t n = scores.n;
  SparseAssignmentResult result;
  std::vector<std::uint32_t> row_to_col;
  if (sparse_min_cost_assignment(scores, row_to_col)) {
    result.assignment.proof_of = std::move(row_to_col);
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& e : scores.rows[i]) {
        if (e.col == result.assignment.proof_of[i]) {
          result.objective += e.score;
          break;
        }
      }
    }
    return result;
  }

  // No perfect matching over retained edges: fill the rest with a sentinel.
  double lowest = kInf;
  for (const auto& row : scores.rows)
    for (const auto& e : row) lowest = std::min(lowest, e.score);
  if (!std::isfinite(lowest)) lowest = 0.0;
  const double sentinel = lowest - 1e6;
  Matrix dense(n, n, sentinel);
  Matrix retained(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& e : scores.rows[i]) {
      dense(i, e.col) = e.score;
      retained(i, e.col) = 1.0;
    }
  }
  result.assignment = solve_dense(dense).assignment;
  result.padded = true;
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = result.assignment.proof_of[i];
    if (retained(i, j) != 0.0) {
      result.objective += dense(i, j);
    } else {
      ++result.sentinel_rows;
    }
  }
  return result;
}

bool sparse_at_least(const SparseAssignmentResult& a, const SparseAssignmentResult& b, double tol) {
  if (a.sentinel_rows != b.sentinel_rows) return a.sentinel_rows < b.sentinel_rows;
  return a.objective >= b.objective - tol;
}

}  // namespace pmatch
