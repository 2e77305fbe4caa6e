// vocab.hpp - token vocabulary with a reserved UNK entry.
#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "pmatch/corpus.hpp"
#include "pmatch/token.hpp"

namespace pmatch {

class Vocabulary {
 public:
  static constexpr std::uint32_t kUnk = 0;

  Vocabulary();

  /// Builds from an ordered token list (UNK is prepended). Duplicates are
  /// rejected with FormatError.
  static Vocabulary from_tokens(std::vector<Token> tokens, std::uint32_t min_freq = 1);

  std::uint32_t id_of(const Token& token) const;
  bool contains(const Token& token) const { return ids_.count(token) != 0; }

  /// Token for a non-UNK id.
  const Token& token(std::uint32_t id) const { return tokens_.at(id - 1); }

  /// Number of ids including UNK.
  std::size_t size() const noexcept { return tokens_.size() + 1; }
  std::uint32_t min_freq() const noexcept { return min_freq_; }

  /// Known tokens in id order (ids 1..size()-1).
  const std::vector<Token>& tokens() const noexcept { return tokens_; }

  std::vector<std::uint32_t> encode(const TokenList& doc) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.min_freq_ == b.min_freq_;
  }

 private:
  std::vector<Token> tokens_;
  std::unordered_map<Token, std::uint32_t, TokenHash> ids_;
  std::uint32_t min_freq_ = 1;
};

/// Counts statement and proof tokens; ids ordered by frequency descending,
/// then first occurrence.
Vocabulary build_vocab(const Corpus& corpus, std::uint32_t min_freq);

}  // namespace pmatch
