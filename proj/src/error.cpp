#include "fewshot/error.hpp"

namespace fewshot {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::FactorizationFailed: return "FactorizationFailed";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidTask: return "InvalidTask";
    case ErrorCode::DegenerateClass: return "DegenerateClass";
    case ErrorCode::EmptyQuery: return "EmptyQuery";
    case ErrorCode::InsufficientClasses: return "InsufficientClasses";
    case ErrorCode::InsufficientExamples: return "InsufficientExamples";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

bool Error::is_data_error() const noexcept {
  switch (code_) {
    case ErrorCode::ParseError:
    case ErrorCode::EmptyClass:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::InsufficientClasses:
    case ErrorCode::InsufficientExamples:
    case ErrorCode::IoError:
      return true;
    default:
      return false;
  }
}

}  // namespace fewshot
