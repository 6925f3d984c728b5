#include "covsteer/errors.hpp"

namespace covsteer {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidProblem: return "InvalidProblem";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::NotControllable: return "NotControllable";
    case ErrorKind::NoSolution: return "NoSolution";
    case ErrorKind::SingularStep: return "SingularStep";
    case ErrorKind::ConditionDisagreement: return "ConditionDisagreement";
    case ErrorKind::InfeasiblePoint: return "InfeasiblePoint";
    case ErrorKind::JacobianSingular: return "JacobianSingular";
    case ErrorKind::MaxIterationsExceeded: return "MaxIterationsExceeded";
    case ErrorKind::InfeasibleTarget: return "InfeasibleTarget";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::SingularCovariance: return "SingularCovariance";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace covsteer
