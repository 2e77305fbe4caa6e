// corpus.hpp - statement/proof pair records, length filtering, splitting and
// the line-delimited corpus file format.
//
// File format (UTF-8, one record per line, `#` lines are comments):
//
//   pair_id <TAB> article_id <TAB> cat1,cat2 <TAB> statement-tokens <TAB> proof-tokens
//
// Token lists are space separated. `t:surface` is a text token, `m:surface`
// a math token in the normal font and `m:surface#font` a math token in one of
// bold, italic, script, fraktur, dstruck, other. Tab, space, `#`, `:`, `%`,
// `,` and newlines inside surfaces and ids are percent-encoded.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "pmatch/token.hpp"

namespace pmatch {

inline constexpr std::size_t kMinPairTokens = 20;
inline constexpr std::size_t kMaxPairTokens = 500;

struct PairRecord {
  std::string pair_id;
  std::string article_id;
  std::vector<std::string> categories;
  TokenList statement;
  TokenList proof;

  friend bool operator==(const PairRecord&, const PairRecord&) = default;
};

enum class SplitTag : std::uint8_t { Unsplit, Train, Dev, Test };

struct Corpus {
  std::vector<PairRecord> pairs;
  SplitTag split_tag = SplitTag::Unsplit;

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

enum class SplitMode : std::uint8_t { Mixed, Unmixed };

struct SplitSpec {
  SplitMode mode = SplitMode::Mixed;
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;

  /// Throws ConfigError unless the ratios are non-negative and sum to 1.
  void validate() const;
};

struct CorpusSplits {
  Corpus train;
  Corpus dev;
  Corpus test;
};

enum class FilterVerdict : std::uint8_t { Keep, RejectTooShort, RejectTooLong };

FilterVerdict filter_pair(const PairRecord& record);

/// Mixed: seeded shuffle, dev/test sizes floored, remainder to train.
/// Unmixed: articles are shuffled and each goes whole to the split with the
/// largest pair-count deficit against its target.
CorpusSplits split_corpus(const Corpus& corpus, const SplitSpec& spec);

/// Pairs whose ids appear more than once are rejected with FormatError.
void check_unique_ids(const Corpus& corpus);

// Percent-encoding of the reserved characters.
std::string escape_field(std::string_view raw);
std::string unescape_field(std::string_view encoded);

std::string format_token(const Token& token);
Token parse_token(std::string_view item);

std::string format_record(const PairRecord& record);

/// Parses one record line; FormatError messages carry `line:column`.
PairRecord parse_record(std::string_view line, std::size_t line_no);

Corpus parse_corpus(std::istream& in);
void write_corpus(const Corpus& corpus, std::ostream& out);

Corpus read_corpus(const std::filesystem::path& path);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

const char* split_tag_name(SplitTag tag);

}  // namespace pmatch
