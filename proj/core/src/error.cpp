#include "fairpipe/error.hpp"

namespace fairpipe {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::RaggedRow: return "RaggedRow";
    case ErrorCode::DuplicateHeader: return "DuplicateHeader";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::UnknownColumn: return "UnknownColumn";
    case ErrorCode::EmptyTable: return "EmptyTable";
    case ErrorCode::TooManyGroups: return "TooManyGroups";
    case ErrorCode::NoBinaryColumn: return "NoBinaryColumn";
    case ErrorCode::NoSensitiveFound: return "NoSensitiveFound";
    case ErrorCode::SameColumn: return "SameColumn";
    case ErrorCode::NonBinaryTarget: return "NonBinaryTarget";
    case ErrorCode::SingleGroup: return "SingleGroup";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::BuilderFailure: return "BuilderFailure";
    case ErrorCode::SplitMismatch: return "SplitMismatch";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace fairpipe
