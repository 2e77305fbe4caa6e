// error.hpp - error codes and the exception type shared by every module.
#pragma once

#include <stdexcept>
#include <string>

namespace pmatch {

enum class ErrorCode {
  MalformedXml,
  EmptyCorpus,
  MissingArticleIds,
  IoError,
  FormatError,
  PoolExhausted,
  EmptyStats,
  EmptyDocument,
  DimensionMismatch,
  StaleCache,
  TooLarge,
  BadK,
  SizeMismatch,
  EmptyCollection,
  DegenerateBatch,
  NonFiniteLoss,
  EmptyInput,
  ConfigError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pmatch
