#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace malm {

enum class ErrorCode {
  ShapeMismatch,
  NonFiniteInput,
  NonFiniteEvaluation,
  NotSymmetric,
  DampingExhausted,
  NotPositiveDefinite,
  SingularSystem,
  MultipleMinimizers,
  UnknownProblem,
  InvalidArgument,
  ConfigError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::NonFiniteEvaluation: return "NonFiniteEvaluation";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::DampingExhausted: return "DampingExhausted";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::MultipleMinimizers: return "MultipleMinimizers";
    case ErrorCode::UnknownProblem: return "UnknownProblem";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable error code. Solver statuses
/// (MaxIters, LineSearchFailed, ...) are reported in result structs instead.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, std::string(to_string(code)) + ": " + what);
}

}  // namespace malm
