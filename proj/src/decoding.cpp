#include "pmatch/decoding.hpp"

#include <algorithm>
#include <exception>
#include <numeric>

#include "pmatch/error.hpp"
#include "pmatch/kernels.hpp"

namespace pmatch {
namespace {

void check_collections(std::size_t statements, std::size_t proofs) {
  if (statements != proofs) {
    throw Error(ErrorCode::SizeMismatch, std::to_string(statements) + " statements vs " + std::to_string(proofs) +
                                             " proofs");
  }
  if (statements == 0) throw Error(ErrorCode::EmptyCollection, "no statements or proofs to score");
}

Matrix encode_range(const DenseEncoder& encoder, std::span<const TokenList> docs, bool parallel) {
  Matrix out(docs.size(), encoder.dim());
  std::exception_ptr failure;
  const auto n = static_cast<std::ptrdiff_t>(docs.size());
#pragma omp parallel for schedule(dynamic, 8) if (parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto v = encoder.encode(docs[static_cast<std::size_t>(i)]);
      if (v.size() != encoder.dim()) throw Error(ErrorCode::DimensionMismatch, "encoder returned a wrong size");
      std::copy(v.begin(), v.end(), out.row(static_cast<std::size_t>(i)).begin());
    } catch (...) {
#pragma omp critical(pmatch_decode_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace

Matrix build_score_matrix(const DenseEncoder& encoder, const BilinearHead& head, std::span<const TokenList> statements,
                          std::span<const TokenList> proofs, const ScoreMatrixOptions& options) {
  check_collections(statements.size(), proofs.size());
  if (head.w.rows() != encoder.dim() || head.w.cols() != encoder.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "bilinear head does not match the encoder dimension");
  }
  const std::size_t n = statements.size();
  const Matrix proof_vecs = encode_range(encoder, proofs, options.parallel);
  const Matrix projected = options.parallel ? kernels::project_rows_parallel(proof_vecs, head.w)
                                            : kernels::project_rows_serial(proof_vecs, head.w);

  Matrix scores(n, n);
  const std::size_t block = std::max<std::size_t>(1, options.block_rows);
  for (std::size_t start = 0; start < n; start += block) {
    const std::size_t count = std::min(block, n - start);
    const Matrix stmt = encode_range(encoder, statements.subspan(start, count), options.parallel);
    const Matrix rows = options.parallel ? kernels::score_block_parallel(stmt, projected, head.b)
                                         : kernels::score_block_serial(stmt, projected, head.b);
    std::copy(rows.values().begin(), rows.values().end(), scores.row(start).begin());
  }
  return scores;
}

Matrix build_score_matrix(const ModelState& state, std::span<const TokenList> statements,
                          std::span<const TokenList> proofs, const ScoreMatrixOptions& options) {
  return build_score_matrix(ModelEncoder(state), state.head, statements, proofs, options);
}

Matrix build_tfidf_score_matrix(const TfIdfStats& stats, std::span<const TokenList> statements,
                                std::span<const TokenList> proofs) {
  check_collections(statements.size(), proofs.size());
  const std::size_t n = statements.size();
  std::vector<SparseVector> s(n), p(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = tfidf_encode(statements[i], stats);
    p[i] = tfidf_encode(proofs[i], stats);
  }
  Matrix scores(n, n);
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      scores(static_cast<std::size_t>(i), j) = cosine(s[static_cast<std::size_t>(i)], p[j]);
    }
  }
  return scores;
}

RankingResult decode_local(const Matrix& scores, bool keep_rankings) {
  const std::size_t n = scores.rows();
  if (scores.cols() != n) throw Error(ErrorCode::SizeMismatch, "score matrix must be square");
  RankingResult result;
  result.gold_rank.resize(n);
  result.best.resize(n);
  if (keep_rankings) result.rankings.resize(n);

  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const auto i = static_cast<std::size_t>(r);
    const auto row = scores.row(i);
    const double gold = row[i];
    std::uint32_t rank = 1;
    std::uint32_t best = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (row[j] > gold || (row[j] == gold && j < i)) ++rank;
      if (row[j] > row[best]) best = static_cast<std::uint32_t>(j);
    }
    result.gold_rank[i] = rank;
    result.best[i] = best;
    if (keep_rankings) {
      std::vector<std::uint32_t> order(n);
      std::iota(order.begin(), order.end(), 0u);
      std::sort(order.begin(), order.end(),
                [&](std::uint32_t a, std::uint32_t b) { return row[a] > row[b] || (row[a] == row[b] && a < b); });
      auto& ranking = result.rankings[i];
      ranking.reserve(n);
      for (auto j : order) ranking.emplace_back(j, row[j]);
    }
  }
  return result;
}

MatchResult decode_global(const Matrix& scores, std::optional<std::size_t> k) {
  MatchResult result;
  result.k_used = k;
  if (!k) {
    auto solved = solve_dense(scores);
    result.assignment = std::move(solved.assignment);
    result.objective = solved.objective;
    return result;
  }
  auto solved = solve_sparse(prune_topk(scores, *k));
  result.assignment = std::move(solved.assignment);
  result.padded = solved.padded;
  result.sentinel_rows = solved.sentinel_rows;
  // Padded rows are scored with their true cell, never the sentinel.
  result.objective = solved.padded ? assignment_score(scores, result.assignment) : solved.objective;
  return result;
}

}  // namespace pmatch
