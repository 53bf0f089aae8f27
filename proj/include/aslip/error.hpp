#pragma once

#include <stdexcept>
#include <string>

namespace aslip {

enum class ErrorCode {
  InvalidParameters,
  SingularState,
  InconsistentTouchdown,
  InvalidGrid,
  NoEvent,
  InfeasibleBounds,
  InfeasibleSolution,
  InconsistentRetraction,
  InvalidPlan,
  IntegrationFailure,
  Io,
};

const char* to_string(ErrorCode code);

/// Exception carrying a machine-checkable error code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace aslip
