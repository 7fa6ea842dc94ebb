#pragma once

#include <stdexcept>
#include <string>

namespace dsvrg {

enum class ErrorCode {
  IndexOutOfRange,
  DimensionMismatch,
  InvalidArgument,
  StrongConvexityUnavailable,
  CapacityExceeded,
  SampleBudgetExhausted,
  InvalidStep,
  NoConvergence,
  NotStrictSubset,
  AccessViolation,
  EmptyDataset,
  Parse,
  Config,
  Io,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::IndexOutOfRange: return "index out of range";
    case ErrorCode::DimensionMismatch: return "dimension mismatch";
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::StrongConvexityUnavailable: return "strong convexity unavailable";
    case ErrorCode::CapacityExceeded: return "capacity exceeded";
    case ErrorCode::SampleBudgetExhausted: return "sample budget exhausted";
    case ErrorCode::InvalidStep: return "invalid step length";
    case ErrorCode::NoConvergence: return "no convergence";
    case ErrorCode::NotStrictSubset: return "subset is not strict";
    case ErrorCode::AccessViolation: return "non-resident function access";
    case ErrorCode::EmptyDataset: return "empty dataset";
    case ErrorCode::Parse: return "parse error";
    case ErrorCode::Config: return "config error";
    case ErrorCode::Io: return "i/o error";
  }
  return "unknown error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// Process exit status used by the CLI: 1 config, 2 runtime contract, 3 I/O.
  int exit_status() const noexcept {
    switch (code_) {
      case ErrorCode::Config:
      case ErrorCode::InvalidArgument:
      case ErrorCode::InvalidStep:
        return 1;
      case ErrorCode::Io:
      case ErrorCode::Parse:
      case ErrorCode::EmptyDataset:
        return 3;
      default:
        return 2;
    }
  }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace dsvrg
