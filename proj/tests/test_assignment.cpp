#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "oracles.hpp"
#include "pmatch/assignment.hpp"
#include "pmatch/error.hpp"
#include "pmatch/kernels.hpp"

using namespace pmatch;

namespace {

Matrix from(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.begin()->size());
  std::size_t r = 0;
  for (const auto& row : rows) {
    std::size_t c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

Assignment perm(std::initializer_list<std::uint32_t> p) { return Assignment{p}; }

}  // namespace

TEST_CASE("brute force examples") {
  auto r = solve_brute(from({{10, 0}, {0, 10}}));
  CHECK(r.assignment == perm({0, 1}));
  CHECK(r.objective == 20);
  r = solve_brute(from({{1, 2}, {2, 1}}));
  CHECK(r.assignment == perm({1, 0}));
  CHECK(r.objective == 4);
  // All-equal matrix: the lexicographically smallest permutation wins.
  CHECK(solve_brute(Matrix(4, 4, 1.0)).assignment == Assignment::identity(4));
  CHECK_THROWS_AS(solve_brute(Matrix(10, 10)), Error);
}

TEST_CASE("dense solver examples") {
  CHECK(solve_dense(from({{3.5}})).assignment == perm({0}));
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.below(30);
    auto m = oracle::random_real_matrix(rng, n);
    std::vector<std::uint32_t> target(n);
    std::iota(target.begin(), target.end(), 0u);
    rng.shuffle(std::span(target));
    for (std::size_t i = 0; i < n; ++i) m(i, target[i]) += 100.0;
    const auto r = solve_dense(m);
    CHECK(r.assignment.proof_of == target);
  }
}

TEST_CASE("dense matches the subset DP oracle") {
  Rng rng(2);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 1 + rng.below(9);
    const auto m = t % 2 ? oracle::random_int_matrix(rng, n, -20, 20) : oracle::random_real_matrix(rng, n);
    const auto dense = solve_dense(m);
    CHECK(dense.assignment.is_permutation());
    CHECK(dense.objective == doctest::Approx(oracle::best_assignment_dp(m)).epsilon(1e-12));
    CHECK(dense.objective == doctest::Approx(assignment_score(m, dense.assignment)).epsilon(1e-12));
    if (n <= 7) {
      const auto brute = solve_brute(m);
      if (t % 2) {
        CHECK(dense.objective == brute.objective);
      } else {
        CHECK(std::abs(dense.objective - brute.objective) < 1e-9);
      }
    }
  }
}

TEST_CASE("dense objective is transpose invariant and shifts by n*c") {
  Rng rng(3);
  const auto m = oracle::random_real_matrix(rng, 200);
  const auto a = solve_dense(m);
  const auto b = solve_dense(m.transposed());
  CHECK(std::abs(a.objective - b.objective) < 1e-8);

  const auto small = oracle::random_int_matrix(rng, 6, 0, 5);
  Matrix shifted = small;
  for (auto& v : shifted.values()) v += 7.0;
  CHECK(solve_dense(shifted).objective == solve_dense(small).objective + 6 * 7.0);
  CHECK(assignment_score(small, solve_dense(shifted).assignment) == solve_dense(small).objective);
}

TEST_CASE("prune_topk") {
  const auto s = prune_topk(from({{5, 9, 1}, {1, 1, 1}, {0, 2, 2}}), 2);
  CHECK(s.rows[0] == std::vector<SparseEntry>{{1, 9}, {0, 5}});
  CHECK(s.rows[1] == std::vector<SparseEntry>{{0, 1}, {1, 1}});
  CHECK(s.rows[2] == std::vector<SparseEntry>{{1, 2}, {2, 2}});
  CHECK_THROWS_AS(prune_topk(Matrix(3, 3), 0), Error);
  CHECK_THROWS_AS(prune_topk(Matrix(3, 3), 4), Error);

  Rng rng(4);
  const auto big = oracle::random_real_matrix(rng, 700);
  const auto pruned = prune_topk(big, 500);
  for (const auto& row : pruned.rows) {
    CHECK(row.size() == 500);
    CHECK(std::is_sorted(row.begin(), row.end(), [](const SparseEntry& a, const SparseEntry& b) {
      return a.score > b.score;
    }));
  }
  CHECK(kernels::prune_topk_serial(big, 37).rows == kernels::prune_topk_parallel(big, 37).rows);
}

TEST_CASE("sparse solver") {
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.below(40);
    const auto m = oracle::random_real_matrix(rng, n);
    const auto full = solve_sparse(prune_topk(m, n));
    CHECK_FALSE(full.padded);
    CHECK(full.assignment.is_permutation());
    CHECK(std::abs(full.objective - solve_dense(m).objective) < 1e-9);
  }

  SUBCASE("infeasible pruning pads") {
    const auto r = solve_sparse(prune_topk(from({{5, 1}, {4, 0}}), 1));
    CHECK(r.padded);
    CHECK(r.assignment.is_permutation());
    CHECK(r.objective == 5.0);
    CHECK(r.sentinel_rows == 1);
  }

  SUBCASE("growing k never loses ground") {
    for (int t = 0; t < 20; ++t) {
      const std::size_t n = 3 + rng.below(20);
      const auto m = oracle::random_real_matrix(rng, n);
      auto previous = solve_sparse(prune_topk(m, 1));
      for (std::size_t k = 2; k <= n; ++k) {
        const auto current = solve_sparse(prune_topk(m, k));
        CHECK(sparse_at_least(current, previous));
        CHECK(current.sentinel_rows <= previous.sentinel_rows);
        previous = current;
      }
      CHECK(previous.sentinel_rows == 0);
    }
  }

  SUBCASE("pruned objective never beats dense") {
    for (int t = 0; t < 10; ++t) {
      const auto m = oracle::random_real_matrix(rng, 100);
      const auto dense = solve_dense(m);
      const auto sparse = solve_sparse(prune_topk(m, 20));
      CHECK(sparse.objective <= dense.objective + 1e-9);
      // When every dense-optimal edge survives, objectives agree.
      const auto pruned = prune_topk(m, 20);
      bool survives = true;
      for (std::size_t i = 0; i < 100; ++i) {
        const auto& row = pruned.rows[i];
        survives = survives && std::any_of(row.begin(), row.end(), [&](const SparseEntry& e) {
                     return e.col == dense.assignment.proof_of[i];
                   });
      }
      if (survives) CHECK(std::abs(sparse.objective - dense.objective) < 1e-9);
    }
  }
}
