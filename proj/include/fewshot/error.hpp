#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fewshot {

enum class ErrorCode {
  NotSymmetric,
  FactorizationFailed,
  DimensionMismatch,
  EmptyInput,
  NonFiniteInput,
  ParseError,
  EmptyClass,
  InvalidSpec,
  InvalidConfig,
  InvalidTask,
  DegenerateClass,
  EmptyQuery,
  InsufficientClasses,
  InsufficientExamples,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

  // Data problems (bad files, too-small datasets) as opposed to bad configuration.
  bool is_data_error() const noexcept;

 private:
  ErrorCode code_;
};

}  // namespace fewshot
