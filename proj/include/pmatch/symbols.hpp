// symbols.hpp - symbol replacement levels applied to proofs.
//
// Candidate variables are single Latin or Greek letters in any font but
// double-struck. Case variants share a key, so mapping `a` to `b` also maps
// `A` to `B`. Only proofs are rewritten and only symbols shared with the
// statement are touched.
#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "pmatch/corpus.hpp"
#include "pmatch/token.hpp"

namespace pmatch {

struct SymbolKey {
  std::string base;  // lowercase letter, UTF-8
  Font font = Font::Normal;

  friend auto operator<=>(const SymbolKey&, const SymbolKey&) = default;
  friend bool operator==(const SymbolKey&, const SymbolKey&) = default;
};

enum class ReplacementKind : std::uint8_t { Conservation, Partial, Full, Transposition };

struct ReplacementLevel {
  ReplacementKind kind = ReplacementKind::Conservation;
  double alpha = 0.0;  // fraction of shared symbols replaced

  static ReplacementLevel conservation() { return {ReplacementKind::Conservation, 0.0}; }
  static ReplacementLevel partial(double alpha) { return {ReplacementKind::Partial, alpha}; }
  static ReplacementLevel full() { return {ReplacementKind::Full, 1.0}; }
  static ReplacementLevel transposition() { return {ReplacementKind::Transposition, 1.0}; }

  friend bool operator==(const ReplacementLevel&, const ReplacementLevel&) = default;
};

const char* replacement_kind_name(ReplacementKind kind);
/// Accepts conservation, partial, full, transposition (case-insensitive).
ReplacementKind parse_replacement_kind(std::string_view name);

struct ReplacementMap {
  std::map<SymbolKey, SymbolKey> entries;
  std::uint64_t seed = 0;

  bool empty() const noexcept { return entries.empty(); }
  std::size_t size() const noexcept { return entries.size(); }
};

struct ProtectedSet {
  std::set<SymbolKey> keys;
  std::string domain_label;

  bool contains(const SymbolKey& key) const { return keys.count(key) != 0; }

  /// {P, E, V, sigma, rho}.
  static ProtectedSet probability();
};

/// One symbol per line, `surface` or `surface#font`; `#` starts a comment line.
ProtectedSet read_protected_set(const std::filesystem::path& path);
ProtectedSet parse_protected_set(std::string_view text, std::string label = {});

/// Key of a candidate variable token, or nullopt for everything else
/// (text, multi-letter names, double-struck letters, non-letters).
std::optional<SymbolKey> symbol_key(const Token& token);

/// pi and e are never replaced.
bool is_constant_key(const SymbolKey& key);

std::set<SymbolKey> extract_shared_symbols(const PairRecord& pair,
                                           const ProtectedSet* protect = nullptr);

/// Ordered fresh-name bases for one pair: Latin letters absent from the pair,
/// then Greek letters (constants excluded), each part shuffled by `seed`.
std::vector<std::string> fresh_name_pool(const PairRecord& pair, const ProtectedSet& protect,
                                         std::uint64_t seed);

/// Builds the map for `shared`. Partial and Full take fresh names in `pool`
/// order; Transposition deranges the shared keys among themselves.
ReplacementMap build_replacement_map(const std::set<SymbolKey>& shared, const ReplacementLevel& level,
                                     const ProtectedSet& protect, std::uint64_t seed,
                                     const std::vector<std::string>& pool);

/// Convenience overload drawing the pool from `pair`.
ReplacementMap build_replacement_map(const PairRecord& pair, const std::set<SymbolKey>& shared,
                                     const ReplacementLevel& level, const ProtectedSet& protect,
                                     std::uint64_t seed);

TokenList apply_replacement(const TokenList& proof, const ReplacementMap& map);

/// Seed for one pair, derived from the corpus seed and the pair id.
std::uint64_t pair_seed(std::uint64_t seed, std::string_view pair_id);

PairRecord replace_pair(const PairRecord& pair, const ReplacementLevel& level,
                        const ProtectedSet& protect, std::uint64_t seed);

Corpus replace_corpus(const Corpus& corpus, const ReplacementLevel& level,
                      const ProtectedSet& protect, std::uint64_t seed);

/// Helpers for Greek/Latin case pairing.
bool is_upper_letter(std::string_view letter);
std::string to_lower_letter(std::string_view letter);
std::string to_upper_letter(std::string_view letter);

}  // namespace pmatch
