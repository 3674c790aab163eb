#include "sdsi/errors.hpp"

namespace sdsi {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedContainer: return "MalformedContainer";
    case ErrorCode::UnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::BackendMismatch: return "BackendMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DegenerateMean: return "DegenerateMean";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::RevisionConflict: return "RevisionConflict";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MixedFileIds: return "MixedFileIds";
    case ErrorCode::UnknownSetup: return "UnknownSetup";
    case ErrorCode::UnknownSpeakerSet: return "UnknownSpeakerSet";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::InvalidState: return "InvalidState";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace sdsi
