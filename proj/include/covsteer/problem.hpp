#pragma once

#include <string>
#include <vector>

#include "covsteer/linalg.hpp"

namespace covsteer {

/**
 * Finite-horizon covariance steering instance
 *
 *   x_{k+1} = A_k x_k + B_k u_k + D_k w_k,   w_k ~ N(0, I_q),
 *
 * steered from N(mu0, Sigma0) to N(muN, SigmaN) in N steps while minimising
 * E Σ_k (x_kᵀ Q_k x_k + u_kᵀ R_k u_k).
 *
 * Every sequence holds N entries. The struct is plain data; call validate()
 * before handing it to a solver.
 */
struct SteeringProblem {
  int N = 0;
  std::vector<Matrix> A, B, D, Q, R;
  Vector mu0, muN;
  Matrix Sigma0, SigmaN;

  Eigen::Index n() const { return A.empty() ? mu0.size() : A.front().rows(); }
  Eigen::Index p() const { return B.empty() ? 0 : B.front().cols(); }
  Eigen::Index q() const { return D.empty() ? 0 : D.front().cols(); }

  /// Expands single matrices to N copies.
  static SteeringProblem time_invariant(int N, const Matrix& A, const Matrix& B, const Matrix& D,
                                        const Matrix& Q, const Matrix& R, const Vector& mu0,
                                        const Vector& muN, const Matrix& Sigma0,
                                        const Matrix& SigmaN);
};

struct Violation {
  std::string invariant;
  int step = -1;        // offending time index, -1 if global
  double margin = 0.0;  // signed; negative means violated by that much
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool has(const std::string& invariant) const;
};

// Invariant identifiers used in reports.
inline constexpr const char* kDimension = "dimension";
inline constexpr const char* kHorizon = "horizon";
inline constexpr const char* kSymmetry = "symmetry";
inline constexpr const char* kInvertibleA = "invertible_A";
inline constexpr const char* kStateWeightPsd = "state_weight_psd";
inline constexpr const char* kInputWeightPd = "input_weight_pd";
inline constexpr const char* kInitialCovariancePd = "initial_covariance_pd";
inline constexpr const char* kTerminalCovarianceAboveNoise = "terminal_covariance_above_noise";
inline constexpr const char* kControllable = "controllable";

/// Dimension checks run first; later checks are skipped when they fail.
ValidationReport validate(const SteeringProblem& problem, const Tolerances& tol = {});

/// Symmetrizes Q, R, Sigma0, SigmaN whose relative asymmetry is within tol.symmetry.
/// Larger asymmetry is left in place for validate() to report.
SteeringProblem symmetrized(SteeringProblem problem, const Tolerances& tol = {});

/// Open-loop transition Φ_A(k, l); inverses are used when k < l.
Matrix phi_A(const SteeringProblem& problem, int k, int l);

/// Reachability Gramian G(k, l); negative-signed sum when k < l.
Matrix gramian(const SteeringProblem& problem, int k, int l);

}  // namespace covsteer
