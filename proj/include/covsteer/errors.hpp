#pragma once

#include <stdexcept>
#include <string>

namespace covsteer {

enum class ErrorKind {
  InvalidProblem,
  DimensionMismatch,
  IndexOutOfRange,
  NotControllable,
  NoSolution,
  SingularStep,
  ConditionDisagreement,
  InfeasiblePoint,
  JacobianSingular,
  MaxIterationsExceeded,
  InfeasibleTarget,
  NotConverged,
  SingularCovariance,
  Io,
};

const char* to_string(ErrorKind kind);

class SteeringError : public std::runtime_error {
 public:
  SteeringError(ErrorKind kind, const std::string& message, int step = -1)
      : std::runtime_error(message), kind_(kind), step_(step) {}

  ErrorKind kind() const { return kind_; }
  // Offending time index, -1 when not applicable.
  int step() const { return step_; }

 private:
  ErrorKind kind_;
  int step_;
};

}  // namespace covsteer
