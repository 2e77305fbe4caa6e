#include "pmatch/ingest.hpp"

#include <istream>
#include <unordered_set>

#include "pmatch/error.hpp"
#include "pmatch/mathml.hpp"

namespace pmatch {
namespace {

[[noreturn]] void fail(ErrorCode code, std::size_t line, std::size_t column, const std::string& msg) {
  throw Error(code, "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg);
}

// Rewrites one token field, expanding x: items into formatted tokens.
std::string expand_field(std::string_view field, std::size_t line_no, std::size_t column) {
  static constexpr std::string_view kClose = "</math>";
  std::string out;
  std::size_t i = 0;
  while (i < field.size()) {
    if (field[i] == ' ') {
      ++i;
      continue;
    }
    std::size_t end;
    std::string_view item;
    if (field.substr(i, 2) == "x:") {
      const auto close = field.find(kClose, i);
      if (close == std::string_view::npos) {
        fail(ErrorCode::MalformedXml, line_no, column + i, "unterminated <math> item");
      }
      end = close + kClose.size();
      TokenList tokens;
      try {
        tokens = linearize_mathml(field.substr(i + 2, end - i - 2));
      } catch (const Error& e) {
        fail(e.code(), line_no, column + i, e.what());
      }
      for (const auto& t : tokens) {
        if (!out.empty()) out += ' ';
        out += format_token(t);
      }
    } else {
      end = field.find(' ', i);
      if (end == std::string_view::npos) end = field.size();
      item = field.substr(i, end - i);
      try {
        parse_token(item);
      } catch (const Error& e) {
        fail(ErrorCode::FormatError, line_no, column + i, e.what());
      }
      if (!out.empty()) out += ' ';
      out += item;
    }
    i = end;
  }
  return out;
}

}  // namespace

std::string IngestReport::summary() const {
  std::string out = "kept " + std::to_string(kept.size()) + ", rejected " + std::to_string(rejected());
  if (too_short > 0 && too_long > 0) {
    out += " (" + std::to_string(too_short) + " too short, " + std::to_string(too_long) + " too long)";
  } else if (too_short > 0) {
    out += " (too short)";
  } else if (too_long > 0) {
    out += " (too long)";
  }
  return out;
}

PairRecord parse_raw_record(std::string_view line, std::size_t line_no) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::string rewritten;
  std::size_t start = 0;
  for (std::size_t field = 0; start <= line.size(); ++field) {
    auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) tab = line.size();
    const auto text = line.substr(start, tab - start);
    if (field > 0) rewritten += '\t';
    if (field == 3 || field == 4) {
      rewritten += expand_field(text, line_no, start + 1);
    } else {
      rewritten += text;
    }
    start = tab + 1;
  }
  return parse_record(rewritten, line_no);
}

IngestReport ingest_raw(std::istream& in) {
  IngestReport report;
  std::string line;
  std::size_t line_no = 0;
  std::unordered_set<std::string> ids;
  std::size_t seen = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    PairRecord rec = parse_raw_record(line, line_no);
    ++seen;
    if (!ids.insert(rec.pair_id).second) {
      fail(ErrorCode::FormatError, line_no, 1, "duplicate pair_id '" + rec.pair_id + "'");
    }
    switch (filter_pair(rec)) {
      case FilterVerdict::Keep: report.kept.pairs.push_back(std::move(rec)); break;
      case FilterVerdict::RejectTooShort: ++report.too_short; break;
      case FilterVerdict::RejectTooLong: ++report.too_long; break;
    }
  }
  if (seen == 0) throw Error(ErrorCode::EmptyCorpus, "no records in input");
  return report;
}

}  // namespace pmatch
