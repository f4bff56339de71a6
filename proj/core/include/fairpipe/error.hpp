#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fairpipe {

/// Named failure categories. The names are part of the external contract:
/// they appear verbatim in HTTP error bodies and CLI messages.
enum class ErrorCode {
  EmptyFile,
  RaggedRow,
  DuplicateHeader,
  TooFewRows,
  UnknownColumn,
  EmptyTable,
  TooManyGroups,
  NoBinaryColumn,
  NoSensitiveFound,
  SameColumn,
  NonBinaryTarget,
  SingleGroup,
  SchemaMismatch,
  DegenerateLabels,
  NonFiniteLoss,
  DimensionMismatch,
  InvalidArgument,
  BuilderFailure,
  SplitMismatch,
  Io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  std::string_view name() const { return to_string(code_); }

 private:
  ErrorCode code_;
};

}  // namespace fairpipe
