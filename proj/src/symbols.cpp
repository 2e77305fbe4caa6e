#include "pmatch/symbols.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pmatch/error.hpp"
#include "pmatch/rng.hpp"

namespace pmatch {
namespace {

// Decodes `s` when it is exactly one UTF-8 code point.
std::optional<char32_t> single_code_point(std::string_view s) {
  if (s.empty()) return std::nullopt;
  const auto b0 = static_cast<unsigned char>(s[0]);
  if (b0 < 0x80) return s.size() == 1 ? std::optional<char32_t>(b0) : std::nullopt;
  if ((b0 & 0xE0) == 0xC0 && s.size() == 2) {
    return static_cast<char32_t>(((b0 & 0x1F) << 6) | (static_cast<unsigned char>(s[1]) & 0x3F));
  }
  return std::nullopt;  // Greek and Latin letters are at most two bytes
}

std::string encode_utf8(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return out;
}

bool is_greek_lower(char32_t cp) { return cp >= 0x03B1 && cp <= 0x03C9 && cp != 0x03C2; }
bool is_greek_upper(char32_t cp) { return cp >= 0x0391 && cp <= 0x03A9 && cp != 0x03A2; }
bool is_latin_lower(char32_t cp) { return cp >= 'a' && cp <= 'z'; }
bool is_latin_upper(char32_t cp) { return cp >= 'A' && cp <= 'Z'; }

bool is_letter(char32_t cp) {
  return is_latin_lower(cp) || is_latin_upper(cp) || is_greek_lower(cp) || is_greek_upper(cp);
}

char32_t lower_of(char32_t cp) {
  if (is_latin_upper(cp) || is_greek_upper(cp)) return cp + 0x20;
  return cp;
}

const std::string kPi = encode_utf8(0x03C0);

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::set<SymbolKey> keys_of(const TokenList& tokens) {
  std::set<SymbolKey> keys;
  for (const auto& t : tokens) {
    if (auto k = symbol_key(t)) keys.insert(std::move(*k));
  }
  return keys;
}

}  // namespace

const char* replacement_kind_name(ReplacementKind kind) {
  switch (kind) {
    case ReplacementKind::Conservation: return "conservation";
    case ReplacementKind::Partial: return "partial";
    case ReplacementKind::Full: return "full";
    case ReplacementKind::Transposition: return "transposition";
  }
  return "conservation";
}

ReplacementKind parse_replacement_kind(std::string_view name) {
  std::string lower;
  for (char c : name) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "conservation") return ReplacementKind::Conservation;
  if (lower == "partial") return ReplacementKind::Partial;
  if (lower == "full") return ReplacementKind::Full;
  if (lower == "transposition") return ReplacementKind::Transposition;
  throw Error(ErrorCode::ConfigError, "unknown replacement level '" + std::string(name) + "'");
}

bool is_upper_letter(std::string_view letter) {
  const auto cp = single_code_point(letter);
  return cp && (is_latin_upper(*cp) || is_greek_upper(*cp));
}

std::string to_lower_letter(std::string_view letter) {
  const auto cp = single_code_point(letter);
  if (!cp || !is_letter(*cp)) return std::string(letter);
  return encode_utf8(lower_of(*cp));
}

std::string to_upper_letter(std::string_view letter) {
  const auto cp = single_code_point(letter);
  if (!cp) return std::string(letter);
  if (is_latin_lower(*cp) || is_greek_lower(*cp)) return encode_utf8(*cp - 0x20);
  return std::string(letter);
}

ProtectedSet ProtectedSet::probability() {
  ProtectedSet set;
  set.domain_label = "probability";
  for (const char* s : {"P", "E", "V", "σ", "ρ"}) set.keys.insert(*symbol_key(Token::math(s)));
  return set;
}

ProtectedSet parse_protected_set(std::string_view text, std::string label) {
  ProtectedSet set;
  set.domain_label = std::move(label);
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string entry = trim(line);
    if (entry.empty() || entry[0] == '#') continue;
    Font font = Font::Normal;
    std::string surface = entry;
    if (const auto hash = entry.find('#'); hash != std::string::npos) {
      const auto parsed = font_from_tag(std::string_view(entry).substr(hash + 1));
      if (!parsed) throw Error(ErrorCode::FormatError, "line " + std::to_string(line_no) + ": unknown font");
      font = *parsed;
      surface = entry.substr(0, hash);
    }
    const auto key = symbol_key(Token::math(surface, font));
    if (!key) {
      throw Error(ErrorCode::FormatError,
                  "line " + std::to_string(line_no) + ": '" + surface + "' is not a replaceable symbol");
    }
    set.keys.insert(*key);
  }
  return set;
}

ProtectedSet read_protected_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_protected_set(ss.str(), path.stem().string());
}

std::optional<SymbolKey> symbol_key(const Token& token) {
  if (token.kind != TokenKind::Math || token.font == Font::DoubleStruck) return std::nullopt;
  const auto cp = single_code_point(token.surface);
  if (!cp || !is_letter(*cp)) return std::nullopt;
  return SymbolKey{encode_utf8(lower_of(*cp)), token.font};
}

bool is_constant_key(const SymbolKey& key) { return key.base == kPi || key.base == "e"; }

std::set<SymbolKey> extract_shared_symbols(const PairRecord& pair, const ProtectedSet* protect) {
  const auto in_statement = keys_of(pair.statement);
  std::set<SymbolKey> shared;
  for (const auto& key : keys_of(pair.proof)) {
    if (!in_statement.count(key) || is_constant_key(key)) continue;
    if (protect != nullptr && protect->contains(key)) continue;
    shared.insert(key);
  }
  return shared;
}

std::vector<std::string> fresh_name_pool(const PairRecord& pair, const ProtectedSet& protect, std::uint64_t seed) {
  std::set<std::string> used;
  for (const auto* list : {&pair.statement, &pair.proof}) {
    for (const auto& t : *list) {
      if (t.kind != TokenKind::Math) continue;
      const auto cp = single_code_point(t.surface);
      if (cp && is_letter(*cp)) used.insert(encode_utf8(lower_of(*cp)));
    }
  }
  for (const auto& key : protect.keys) used.insert(key.base);

  auto usable = [&](const std::string& base) { return !used.count(base) && !is_constant_key({base, Font::Normal}); };

  std::vector<std::string> latin, greek;
  for (char32_t c = 'a'; c <= 'z'; ++c) {
    if (auto s = encode_utf8(c); usable(s)) latin.push_back(std::move(s));
  }
  for (char32_t c = 0x03B1; c <= 0x03C9; ++c) {
    if (!is_greek_lower(c)) continue;
    if (auto s = encode_utf8(c); usable(s)) greek.push_back(std::move(s));
  }
  Rng latin_rng(derive_seed(seed, "latin"));
  latin_rng.shuffle(std::span(latin));
  Rng greek_rng(derive_seed(seed, "greek"));
  greek_rng.shuffle(std::span(greek));
  latin.insert(latin.end(), greek.begin(), greek.end());
  return latin;
}

ReplacementMap build_replacement_map(const std::set<SymbolKey>& shared, const ReplacementLevel& level,
                                     const ProtectedSet& protect, std::uint64_t seed,
                                     const std::vector<std::string>& pool) {
  ReplacementMap map;
  map.seed = seed;
  if (level.kind == ReplacementKind::Conservation) return map;

  std::vector<SymbolKey> keys;
  for (const auto& k : shared) {
    if (!protect.contains(k) && !is_constant_key(k)) keys.push_back(k);
  }
  if (keys.empty()) return map;

  std::size_t next_fresh = 0;
  auto map_fresh = [&](const SymbolKey& key) {
    while (next_fresh < pool.size()) {
      SymbolKey target{pool[next_fresh++], key.font};
      if (target == key || protect.contains(target) || is_constant_key(target)) continue;
      map.entries.emplace(key, std::move(target));
      return;
    }
    throw Error(ErrorCode::PoolExhausted, "no fresh symbol name left for '" + key.base + "'");
  };

  switch (level.kind) {
    case ReplacementKind::Partial: {
      const double alpha = std::clamp(level.alpha, 0.0, 1.0);
      const auto count = static_cast<std::size_t>(std::round(alpha * static_cast<double>(keys.size())));
      std::vector<std::size_t> idx(keys.size());
      std::iota(idx.begin(), idx.end(), 0);
      Rng rng(derive_seed(seed, "sample"));
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng.below(idx.size() - i);
        std::swap(idx[i], idx[j]);
      }
      for (std::size_t i = 0; i < count; ++i) map_fresh(keys[idx[i]]);
      break;
    }
    case ReplacementKind::Full:
      for (const auto& k : keys) map_fresh(k);
      break;
    case ReplacementKind::Transposition: {
      // Derange within each font so the font channel is preserved; a font
      // with a single key has no derangement and gets a fresh name instead.
      std::map<Font, std::vector<SymbolKey>> by_font;
      for (const auto& k : keys) by_font[k.font].push_back(k);
      Rng rng(derive_seed(seed, "derange"));
      for (auto& [font, group] : by_font) {
        if (group.size() == 1) {
          map_fresh(group.front());
          continue;
        }
        std::vector<std::size_t> perm(group.size());
        for (;;) {
          std::iota(perm.begin(), perm.end(), 0);
          rng.shuffle(std::span(perm));
          bool fixed = false;
          for (std::size_t i = 0; i < perm.size(); ++i) fixed = fixed || perm[i] == i;
          if (!fixed) break;
        }
        for (std::size_t i = 0; i < group.size(); ++i) map.entries.emplace(group[i], group[perm[i]]);
      }
      break;
    }
    case ReplacementKind::Conservation:
      break;
  }
  return map;
}

ReplacementMap build_replacement_map(const PairRecord& pair, const std::set<SymbolKey>& shared,
                                     const ReplacementLevel& level, const ProtectedSet& protect,
                                     std::uint64_t seed) {
  return build_replacement_map(shared, level, protect, seed,
                               fresh_name_pool(pair, protect, derive_seed(seed, "pool")));
}

TokenList apply_replacement(const TokenList& proof, const ReplacementMap& map) {
  if (map.empty()) return proof;
  TokenList out;
  out.reserve(proof.size());
  for (const auto& t : proof) {
    const auto key = symbol_key(t);
    const auto it = key ? map.entries.find(*key) : map.entries.end();
    if (it == map.entries.end()) {
      out.push_back(t);
      continue;
    }
    std::string surface = is_upper_letter(t.surface) ? to_upper_letter(it->second.base) : it->second.base;
    out.push_back(Token::math(std::move(surface), t.font));
  }
  return out;
}

std::uint64_t pair_seed(std::uint64_t seed, std::string_view pair_id) { return derive_seed(seed, pair_id); }

PairRecord replace_pair(const PairRecord& pair, const ReplacementLevel& level, const ProtectedSet& protect,
                        std::uint64_t seed) {
  if (level.kind == ReplacementKind::Conservation) return pair;
  const auto shared = extract_shared_symbols(pair, &protect);
  const auto map = build_replacement_map(pair, shared, level, protect, seed);
  PairRecord out = pair;
  out.proof = apply_replacement(pair.proof, map);
  return out;
}

Corpus replace_corpus(const Corpus& corpus, const ReplacementLevel& level, const ProtectedSet& protect,
                      std::uint64_t seed) {
  Corpus out;
  out.split_tag = corpus.split_tag;
  out.pairs.resize(corpus.size());
  std::exception_ptr failure;
  const auto n = static_cast<std::ptrdiff_t>(corpus.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto& pair = corpus.pairs[static_cast<std::size_t>(i)];
      out.pairs[static_cast<std::size_t>(i)] = replace_pair(pair, level, protect, pair_seed(seed, pair.pair_id));
    } catch (...) {
#pragma omp critical(pmatch_replace_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace pmatch
