#pragma once

#include <stdexcept>
#include <string>

namespace lw {

enum class ErrorCode {
  Io,
  Parse,
  InvalidArgument,
  NonPositiveValue,
  UnsortedBreakpoints,
  EmptyProfile,
  OutOfDomain,
  ThresholdOutOfRange,
  BracketFailure,
  NotAnEigenvalue,
  UnsupportedCrossSection,
  BadLayer,
  NotPiecewiseConstant,
  NotInSector,
  LayerIntersectsWell,
  EmptyFamily,
  NotSmoothProfile,
  OutOfSector,
  TooManyRequested,
  ClusterUnresolved,
  LengthMismatch,
  StepSizeUnderflow,
  Numerical,
};

const char* error_code_name(ErrorCode code);

/// Whether the code describes bad input/configuration as opposed to a
/// numerical failure inside a solve.
bool is_usage_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void throw_error(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace lw
