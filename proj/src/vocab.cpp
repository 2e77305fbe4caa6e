#include "pmatch/vocab.hpp"

#include <algorithm>

#include "pmatch/error.hpp"

namespace pmatch {

Vocabulary::Vocabulary() = default;

Vocabulary Vocabulary::from_tokens(std::vector<Token> tokens, std::uint32_t min_freq) {
  Vocabulary v;
  v.min_freq_ = min_freq;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.ids_.emplace(v.tokens_[i], static_cast<std::uint32_t>(i + 1)).second) {
      throw Error(ErrorCode::FormatError, "duplicate vocabulary entry " + to_display(v.tokens_[i]));
    }
  }
  return v;
}

std::uint32_t Vocabulary::id_of(const Token& token) const {
  const auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<std::uint32_t> Vocabulary::encode(const TokenList& doc) const {
  std::vector<std::uint32_t> ids;
  ids.reserve(doc.size());
  for (const auto& t : doc) ids.push_back(id_of(t));
  return ids;
}

Vocabulary build_vocab(const Corpus& corpus, std::uint32_t min_freq) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot build a vocabulary from an empty corpus");
  if (min_freq < 1) min_freq = 1;

  struct Count {
    std::size_t freq = 0;
    std::size_t first = 0;
  };
  std::unordered_map<Token, Count, TokenHash> counts;
  std::vector<Token> order;
  std::size_t position = 0;
  for (const auto& pair : corpus.pairs) {
    for (const auto* list : {&pair.statement, &pair.proof}) {
      for (const auto& t : *list) {
        auto [it, inserted] = counts.try_emplace(t, Count{0, position});
        if (inserted) order.push_back(t);
        ++it->second.freq;
        ++position;
      }
    }
  }

  std::vector<Token> kept;
  for (const auto& t : order) {
    if (counts[t].freq >= min_freq) kept.push_back(t);
  }
  std::stable_sort(kept.begin(), kept.end(), [&](const Token& a, const Token& b) {
    const auto& ca = counts[a];
    const auto& cb = counts[b];
    if (ca.freq != cb.freq) return ca.freq > cb.freq;
    return ca.first < cb.first;
  });
  return Vocabulary::from_tokens(std::move(kept), min_freq);
}

}  // namespace pmatch
