// decoding.hpp - local (per-statement ranking) and global (one-to-one
// assignment) decoding of statement/proof score matrices.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "pmatch/assignment.hpp"
#include "pmatch/matrix.hpp"
#include "pmatch/model.hpp"
#include "pmatch/tfidf.hpp"
#include "pmatch/token.hpp"

namespace pmatch {

/// Anything that maps a document to a fixed-size vector.
class DenseEncoder {
 public:
  virtual ~DenseEncoder() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<double> encode(const TokenList& doc) const = 0;
};

class ModelEncoder final : public DenseEncoder {
 public:
  explicit ModelEncoder(const ModelState& state) : state_(state) {}
  std::size_t dim() const override { return state_.dim(); }
  std::vector<double> encode(const TokenList& doc) const override { return pmatch::encode(state_, doc); }

 private:
  const ModelState& state_;
};

struct ScoreMatrixOptions {
  std::size_t block_rows = 1024;  // statements encoded per block
  bool parallel = true;
};

/// m[i][j] = score(enc(s_i), enc(p_j)); each text is encoded exactly once.
/// SizeMismatch / EmptyCollection on bad input.
Matrix build_score_matrix(const DenseEncoder& encoder, const BilinearHead& head,
                          std::span<const TokenList> statements, std::span<const TokenList> proofs,
                          const ScoreMatrixOptions& options = {});

Matrix build_score_matrix(const ModelState& state, std::span<const TokenList> statements,
                          std::span<const TokenList> proofs, const ScoreMatrixOptions& options = {});

/// Cosine similarity of TF-IDF vectors.
Matrix build_tfidf_score_matrix(const TfIdfStats& stats, std::span<const TokenList> statements,
                                std::span<const TokenList> proofs);

struct RankingResult {
  // rankings[i] lists every proof for statement i by (score desc, index asc).
  // Left empty when decoding with keep_rankings = false.
  std::vector<std::vector<std::pair<std::uint32_t, double>>> rankings;
  std::vector<std::uint32_t> gold_rank;  // 1-based, gold proof of i is i
  std::vector<std::uint32_t> best;       // first-ranked proof per statement

  std::size_t size() const noexcept { return gold_rank.size(); }
  std::uint32_t top1(std::size_t i) const { return best[i]; }
};

struct MatchResult {
  Assignment assignment;
  double objective = 0.0;  // assignment score under the full matrix
  bool padded = false;
  std::size_t sentinel_rows = 0;
  std::optional<std::size_t> k_used;  // nullopt = all candidates
};

/// gold_rank[i] = 1 + #{j : m_ij > m_ii} + #{j < i : m_ij == m_ii}.
RankingResult decode_local(const Matrix& scores, bool keep_rankings = true);

/// k == nullopt solves the dense problem, otherwise prune to k then solve sparse.
MatchResult decode_global(const Matrix& scores, std::optional<std::size_t> k = std::nullopt);

}  // namespace pmatch
