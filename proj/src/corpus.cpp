#include "pmatch/corpus.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "pmatch/error.hpp"
#include "pmatch/rng.hpp"

namespace pmatch {
namespace {

bool needs_escape(char c) {
  return c == '%' || c == '\t' || c == ' ' || c == '#' || c == ':' || c == ',' || c == '\n' || c == '\r';
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

[[noreturn]] void format_error(std::size_t line, std::size_t column, const std::string& msg) {
  throw Error(ErrorCode::FormatError,
              "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg);
}

std::vector<std::string_view> split_view(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(text.substr(start));
      return parts;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string join_tokens(const TokenList& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += format_token(t);
  }
  return out;
}

// Parses a space-separated token list; `column` is the 1-based column of the field.
TokenList parse_token_list(std::string_view field, std::size_t line_no, std::size_t column) {
  TokenList tokens;
  if (field.empty()) return tokens;
  std::size_t offset = 0;
  for (auto item : split_view(field, ' ')) {
    try {
      tokens.push_back(parse_token(item));
    } catch (const Error& e) {
      format_error(line_no, column + offset, e.what());
    }
    offset += item.size() + 1;
  }
  return tokens;
}

std::size_t floor_count(double ratio, std::size_t n) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
}

}  // namespace

void SplitSpec::validate() const {
  if (train < 0 || dev < 0 || test < 0) throw Error(ErrorCode::ConfigError, "split ratios must be non-negative");
  if (std::abs(train + dev + test - 1.0) > 1e-9) throw Error(ErrorCode::ConfigError, "split ratios must sum to 1");
}

const char* split_tag_name(SplitTag tag) {
  switch (tag) {
    case SplitTag::Unsplit: return "unsplit";
    case SplitTag::Train: return "train";
    case SplitTag::Dev: return "dev";
    case SplitTag::Test: return "test";
  }
  return "unsplit";
}

FilterVerdict filter_pair(const PairRecord& record) {
  const std::size_t s = record.statement.size();
  const std::size_t p = record.proof.size();
  if (s < kMinPairTokens || p < kMinPairTokens) return FilterVerdict::RejectTooShort;
  if (s > kMaxPairTokens || p > kMaxPairTokens) return FilterVerdict::RejectTooLong;
  return FilterVerdict::Keep;
}

void check_unique_ids(const Corpus& corpus) {
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
    if (!seen.insert(corpus.pairs[i].pair_id).second) {
      throw Error(ErrorCode::FormatError, "duplicate pair_id '" + corpus.pairs[i].pair_id + "'");
    }
  }
}

CorpusSplits split_corpus(const Corpus& corpus, const SplitSpec& spec) {
  spec.validate();
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot split an empty corpus");
  const std::size_t n = corpus.size();

  CorpusSplits out;
  out.train.split_tag = SplitTag::Train;
  out.dev.split_tag = SplitTag::Dev;
  out.test.split_tag = SplitTag::Test;
  Rng rng(spec.seed);

  if (spec.mode == SplitMode::Mixed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span(order));
    const std::size_t n_dev = floor_count(spec.dev, n);
    const std::size_t n_test = floor_count(spec.test, n);
    const std::size_t n_train = n - n_dev - n_test;
    for (std::size_t r = 0; r < n; ++r) {
      Corpus& target = r < n_train ? out.train : (r < n_train + n_dev ? out.dev : out.test);
      target.pairs.push_back(corpus.pairs[order[r]]);
    }
    return out;
  }

  // Unmixed: whole articles go to the split furthest below its target.
  std::vector<std::string> articles;
  std::unordered_map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& id = corpus.pairs[i].article_id;
    if (id.empty()) {
      throw Error(ErrorCode::MissingArticleIds, "pair '" + corpus.pairs[i].pair_id + "' has no article_id");
    }
    auto [it, inserted] = members.try_emplace(id);
    if (inserted) articles.push_back(id);
    it->second.push_back(i);
  }
  rng.shuffle(std::span(articles));

  const double targets[3] = {spec.train * n, spec.dev * n, spec.test * n};
  Corpus* splits[3] = {&out.train, &out.dev, &out.test};
  for (const auto& article : articles) {
    std::size_t pick = 0;
    double best = -1e300;
    for (std::size_t s = 0; s < 3; ++s) {
      const double deficit = targets[s] - static_cast<double>(splits[s]->size());
      if (deficit > best) {
        best = deficit;
        pick = s;
      }
    }
    for (std::size_t idx : members[article]) splits[pick]->pairs.push_back(corpus.pairs[idx]);
  }
  return out;
}

std::string escape_field(std::string_view raw) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    if (needs_escape(c)) {
      const auto u = static_cast<unsigned char>(c);
      out += '%';
      out += kHex[u >> 4];
      out += kHex[u & 0xF];
    } else {
      out += c;
    }
  }
  return out;
}

std::string unescape_field(std::string_view encoded) {
  std::string out;
  out.reserve(encoded.size());
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    if (encoded[i] != '%') {
      out += encoded[i];
      continue;
    }
    if (i + 2 >= encoded.size()) {
      throw Error(ErrorCode::FormatError, "truncated percent escape");
    }
    const int hi = hex_value(encoded[i + 1]);
    const int lo = hex_value(encoded[i + 2]);
    if (hi < 0 || lo < 0) throw Error(ErrorCode::FormatError, "bad percent escape");
    out += static_cast<char>(hi * 16 + lo);
    i += 2;
  }
  return out;
}

std::string format_token(const Token& token) {
  std::string out = token.kind == TokenKind::Text ? "t:" : "m:";
  out += escape_field(token.surface);
  if (token.kind == TokenKind::Math && token.font != Font::Normal) {
    out += '#';
    out += font_tag(token.font);
  }
  return out;
}

Token parse_token(std::string_view item) {
  if (item.size() < 3 || item[1] != ':') {
    throw Error(ErrorCode::FormatError, "malformed token '" + std::string(item) + "'");
  }
  const char sigil = item[0];
  std::string_view body = item.substr(2);
  if (sigil == 't') {
    if (body.find('#') != std::string_view::npos) throw Error(ErrorCode::FormatError, "text token with font tag");
    Token t = Token::text(unescape_field(body));
    if (!valid_surface(t.surface)) throw Error(ErrorCode::FormatError, "empty or whitespace surface");
    return t;
  }
  if (sigil == 'm') {
    Font font = Font::Normal;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) {
      const auto tag = body.substr(hash + 1);
      const auto parsed = font_from_tag(tag);
      if (!parsed || tag.empty() || tag == "normal") {
        throw Error(ErrorCode::FormatError, "unknown font '" + std::string(tag) + "'");
      }
      font = *parsed;
      body = body.substr(0, hash);
    }
    Token t = Token::math(unescape_field(body), font);
    if (!valid_surface(t.surface)) throw Error(ErrorCode::FormatError, "empty or whitespace surface");
    return t;
  }
  throw Error(ErrorCode::FormatError, std::string("unknown token kind '") + sigil + "'");
}

std::string format_record(const PairRecord& record) {
  std::string cats;
  for (const auto& c : record.categories) {
    if (!cats.empty()) cats += ',';
    cats += escape_field(c);
  }
  std::string out = escape_field(record.pair_id);
  out += '\t';
  out += escape_field(record.article_id);
  out += '\t';
  out += cats;
  out += '\t';
  out += join_tokens(record.statement);
  out += '\t';
  out += join_tokens(record.proof);
  return out;
}

PairRecord parse_record(std::string_view line, std::size_t line_no) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto fields = split_view(line, '\t');
  if (fields.size() != 5) {
    format_error(line_no, 1, "expected 5 tab-separated fields, found " + std::to_string(fields.size()));
  }
  std::size_t columns[5];
  std::size_t col = 1;
  for (std::size_t i = 0; i < 5; ++i) {
    columns[i] = col;
    col += fields[i].size() + 1;
  }

  PairRecord rec;
  try {
    rec.pair_id = unescape_field(fields[0]);
  } catch (const Error& e) {
    format_error(line_no, columns[0], e.what());
  }
  if (rec.pair_id.empty()) format_error(line_no, columns[0], "empty pair_id");
  try {
    rec.article_id = unescape_field(fields[1]);
  } catch (const Error& e) {
    format_error(line_no, columns[1], e.what());
  }
  if (!fields[2].empty()) {
    for (auto c : split_view(fields[2], ',')) {
      try {
        rec.categories.push_back(unescape_field(c));
      } catch (const Error& e) {
        format_error(line_no, columns[2], e.what());
      }
    }
  }
  rec.statement = parse_token_list(fields[3], line_no, columns[3]);
  rec.proof = parse_token_list(fields[4], line_no, columns[4]);
  return rec;
}

Corpus parse_corpus(std::istream& in) {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  std::unordered_set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (line[0] == '#') {
      static constexpr std::string_view kSplit = "#split=";
      if (line.rfind(kSplit, 0) == 0) {
        const auto name = std::string_view(line).substr(kSplit.size());
        if (name == "train") corpus.split_tag = SplitTag::Train;
        else if (name == "dev") corpus.split_tag = SplitTag::Dev;
        else if (name == "test") corpus.split_tag = SplitTag::Test;
        else if (name == "unsplit") corpus.split_tag = SplitTag::Unsplit;
        else format_error(line_no, kSplit.size() + 1, "unknown split tag");
      }
      continue;
    }
    PairRecord rec = parse_record(line, line_no);
    if (!ids.insert(rec.pair_id).second) format_error(line_no, 1, "duplicate pair_id '" + rec.pair_id + "'");
    corpus.pairs.push_back(std::move(rec));
  }
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "corpus has no records");
  return corpus;
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  if (corpus.split_tag != SplitTag::Unsplit) out << "#split=" << split_tag_name(corpus.split_tag) << '\n';
  for (const auto& rec : corpus.pairs) out << format_record(rec) << '\n';
}

Corpus read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  return parse_corpus(in);
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  write_corpus(corpus, out);
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

}  // namespace pmatch
