#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lateralsim {

enum class ErrorCode {
  InvalidConfig,
  Infeasible,
  ParseError,
  ValidationError,
  InvalidStart,
  SchemaMismatch,
  FingerprintMismatch,
  DimensionMismatch,
  DegenerateGroup,
  NonFiniteLoss,
  EmptyCandidates,
  ActualNotInRanking,
  UnknownHost,
  InvalidSequence,
  IoError,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this exception type. what()
// returns "<Code>: <message>" so callers can print a single parsable line.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

// Thrown when a document parses but the resulting network breaks invariants.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations);

  const std::vector<std::string>& violations() const noexcept {
    return violations_;
  }

 private:
  std::vector<std::string> violations_;
};

}  // namespace lateralsim
