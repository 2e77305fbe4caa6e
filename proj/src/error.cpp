#include "pmatch/error.hpp"

namespace pmatch {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedXml: return "MalformedXml";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::MissingArticleIds: return "MissingArticleIds";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::PoolExhausted: return "PoolExhausted";
    case ErrorCode::EmptyStats: return "EmptyStats";
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::StaleCache: return "StaleCache";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::BadK: return "BadK";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::EmptyCollection: return "EmptyCollection";
    case ErrorCode::DegenerateBatch: return "DegenerateBatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace pmatch
