#include "pmatch/tfidf.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "pmatch/error.hpp"

namespace pmatch {

TfIdfStats TfIdfStats::from_documents(std::span<const TokenList> docs) {
  TfIdfStats stats;
  stats.num_docs_ = docs.size();
  std::vector<std::uint32_t> last_doc;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (const auto& t : docs[d]) {
      auto [it, inserted] = stats.ids_.try_emplace(t, static_cast<std::uint32_t>(stats.df_.size()));
      if (inserted) {
        stats.df_.push_back(0);
        last_doc.push_back(static_cast<std::uint32_t>(-1));
      }
      const auto id = it->second;
      if (last_doc[id] != d) {
        last_doc[id] = static_cast<std::uint32_t>(d);
        ++stats.df_[id];
      }
    }
  }
  return stats;
}

TfIdfStats TfIdfStats::from_corpus(const Corpus& corpus) {
  std::vector<TokenList> docs;
  docs.reserve(corpus.size() * 2);
  for (const auto& p : corpus.pairs) {
    docs.push_back(p.statement);
    docs.push_back(p.proof);
  }
  return from_documents(docs);
}

std::int64_t TfIdfStats::term_id(const Token& token) const {
  const auto it = ids_.find(token);
  return it == ids_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

double TfIdfStats::idf(std::uint32_t term) const {
  return std::log(static_cast<double>(num_docs_) / (1.0 + static_cast<double>(df_.at(term))));
}

SparseVector tfidf_encode(const TokenList& doc, const TfIdfStats& stats) {
  if (stats.num_docs() == 0) throw Error(ErrorCode::EmptyStats, "TF-IDF statistics cover no documents");
  std::map<std::uint32_t, std::size_t> tf;
  for (const auto& t : doc) {
    const auto id = stats.term_id(t);
    if (id >= 0) ++tf[static_cast<std::uint32_t>(id)];
  }
  SparseVector v;
  v.reserve(tf.size());
  for (const auto& [term, count] : tf) v.emplace_back(term, static_cast<double>(count) * stats.idf(term));
  return v;
}

double cosine(const SparseVector& a, const SparseVector& b) {
  double na = 0.0, nb = 0.0, ab = 0.0;
  for (const auto& [_, w] : a) na += w * w;
  for (const auto& [_, w] : b) nb += w * w;
  if (na == 0.0 || nb == 0.0) return 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first == b[j].first) {
      ab += a[i].second * b[j].second;
      ++i;
      ++j;
    } else if (a[i].first < b[j].first) {
      ++i;
    } else {
      ++j;
    }
  }
  return ab / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace pmatch
