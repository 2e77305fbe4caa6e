// ingest.hpp - raw record files to clean corpora.
//
// Raw records use the corpus line layout, except that a token list may also
// hold `x:<math>...</math>` items. Such an item runs to the matching
// `</math>` (spaces included) and is replaced by its linearized tokens.
#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>

#include "pmatch/corpus.hpp"

namespace pmatch {

struct IngestReport {
  Corpus kept;
  std::size_t too_short = 0;
  std::size_t too_long = 0;

  std::size_t rejected() const noexcept { return too_short + too_long; }
  /// "kept 4, rejected 1 (too short)".
  std::string summary() const;
};

/// One raw line to a record. FormatError / MalformedXml carry `line:column`.
PairRecord parse_raw_record(std::string_view line, std::size_t line_no);

/// Reads raw records, linearizes embedded MathML and applies filter_pair.
IngestReport ingest_raw(std::istream& in);

}  // namespace pmatch
