// assignment.hpp - maximization linear assignment solvers.
//
// solve_brute enumerates permutations (reference), solve_dense is a
// shortest-augmenting-path solver with dual potentials (Jonker-Volgenant
// family, O(n^3)), and solve_sparse runs the same augmentation over the edges
// kept by prune_topk.
#pragma once

#include <cstdint>
#include <vector>

#include "pmatch/matrix.hpp"

namespace pmatch {

/// proof_of[i] is the column assigned to row i.
struct Assignment {
  std::vector<std::uint32_t> proof_of;

  std::size_t size() const noexcept { return proof_of.size(); }
  bool is_permutation() const;
  static Assignment identity(std::size_t n);

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct AssignmentResult {
  Assignment assignment;
  double objective = 0.0;
};

struct SparseEntry {
  std::uint32_t col;
  double score;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Rows sorted by descending score, at most k entries each, no duplicates.
struct SparseScoreMatrix {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<std::vector<SparseEntry>> rows;
};

struct SparseAssignmentResult {
  Assignment assignment;
  double objective = 0.0;  // genuine edges only
  bool padded = false;     // some row had to take a non-retained cell
  std::size_t sentinel_rows = 0;  // rows matched through a non-retained cell
};

/// The solver maximizes (-sentinel_rows, objective) lexicographically, and
/// that pair never decreases as k grows. The scalar alone can.
bool sparse_at_least(const SparseAssignmentResult& a, const SparseAssignmentResult& b, double tol = 1e-9);

inline constexpr std::size_t kBruteForceLimit = 9;

/// TooLarge for n > 9. Ties go to the lexicographically smallest permutation.
AssignmentResult solve_brute(const Matrix& scores);

AssignmentResult solve_dense(const Matrix& scores);

/// Keeps each row's k best columns (ties by lower column). BadK unless 1 <= k <= n.
SparseScoreMatrix prune_topk(const Matrix& scores, std::size_t k);

/// Non-retained cells are worth (min retained score - 1e6) when no perfect
/// matching exists over retained edges; `padded` reports that case.
SparseAssignmentResult solve_sparse(const SparseScoreMatrix& scores);

double assignment_score(const Matrix& scores, const Assignment& assignment);

}  // namespace pmatch
