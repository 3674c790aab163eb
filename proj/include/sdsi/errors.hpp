#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sdsi {

enum class ErrorCode {
  MalformedContainer,
  UnsupportedEncoding,
  OutOfRange,
  InvalidArgument,
  TooShort,
  BackendMismatch,
  EmptyInput,
  DegenerateMean,
  LengthMismatch,
  EmptySet,
  SchemaViolation,
  IndexOutOfRange,
  RevisionConflict,
  ParseError,
  MixedFileIds,
  UnknownSetup,
  UnknownSpeakerSet,
  NotFound,
  InvalidState,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so the
// service layer can map it onto a wire-level error without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sdsi
