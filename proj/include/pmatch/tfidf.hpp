// tfidf.hpp - TF-IDF baseline: sparse document vectors and cosine scoring.
#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pmatch/corpus.hpp"
#include "pmatch/token.hpp"

namespace pmatch {

/// Sorted (term id, weight) pairs.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

/// Document-frequency table; every statement and every proof is a document.
class TfIdfStats {
 public:
  static TfIdfStats from_documents(std::span<const TokenList> docs);
  static TfIdfStats from_corpus(const Corpus& corpus);

  std::size_t num_docs() const noexcept { return num_docs_; }
  std::size_t num_terms() const noexcept { return df_.size(); }

  /// -1 when the token never occurred.
  std::int64_t term_id(const Token& token) const;
  std::uint32_t df(std::uint32_t term) const { return df_.at(term); }
  /// ln(N / (1 + df)).
  double idf(std::uint32_t term) const;

 private:
  std::unordered_map<Token, std::uint32_t, TokenHash> ids_;
  std::vector<std::uint32_t> df_;
  std::size_t num_docs_ = 0;
};

/// weight(t) = tf(t, doc) * idf(t); tokens unknown to `stats` are dropped.
SparseVector tfidf_encode(const TokenList& doc, const TfIdfStats& stats);

/// Zero vectors have cosine 0 with everything.
double cosine(const SparseVector& a, const SparseVector& b);

}  // namespace pmatch
