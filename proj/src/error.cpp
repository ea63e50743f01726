#include "lateralsim/error.hpp"

namespace lateralsim {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::InvalidStart: return "InvalidStart";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::FingerprintMismatch: return "FingerprintMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateGroup: return "DegenerateGroup";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyCandidates: return "EmptyCandidates";
    case ErrorCode::ActualNotInRanking: return "ActualNotInRanking";
    case ErrorCode::UnknownHost: return "UnknownHost";
    case ErrorCode::InvalidSequence: return "InvalidSequence";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      message_(message) {}

namespace {

std::string join_violations(const std::vector<std::string>& violations) {
  std::string out = std::to_string(violations.size()) + " violation(s)";
  for (const auto& v : violations) {
    out += "; ";
    out += v;
  }
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> violations)
    : Error(ErrorCode::ValidationError, join_violations(violations)),
      violations_(std::move(violations)) {}

}  // namespace lateralsim
