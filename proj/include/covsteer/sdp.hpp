#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "covsteer/errors.hpp"
#include "covsteer/mean_steering.hpp"

namespace covsteer {

/**
 * Linear description of the relaxed covariance program
 *
 *   min  Σ_k tr(Q_k Σ_k) + tr(R_k Y_k)
 *   s.t. [[Σ_k, U_kᵀ],[U_k, Y_k]] ⪰ 0,
 *        G_k = A_kΣ_kA_kᵀ + B_kU_kA_kᵀ + A_kU_kᵀB_kᵀ + B_kY_kB_kᵀ + D_kD_kᵀ − Σ_{k+1} = 0,
 *
 * with Σ₀ and Σ_N substituted by the boundary data.
 *
 * Variable vector x, in order:
 *   Σ_1 … Σ_{N−1}   upper triangle, row by row (i ≤ j)
 *   U_0 … U_{N−1}   all p·n entries, column-major
 *   Y_0 … Y_{N−1}   upper triangle, row by row
 * Equality rows: upper triangle of G_0, then G_1, …, same entry order.
 * equality_matrix · x − equality_rhs stacks those entries of G_k.
 */
struct SdpVariable {
  char kind = 'S';  // 'S', 'U' or 'Y'
  int k = 0;
  int row = 0;
  int col = 0;
};

struct SdpProgram {
  int N = 0;
  Eigen::Index n = 0, p = 0;
  std::vector<SdpVariable> variables;
  std::vector<int> block_sizes;  // N PSD blocks of size n+p
  Matrix equality_matrix;
  Vector equality_rhs;
  Vector objective;               // coefficient of each variable
  double objective_constant = 0;  // tr(Q_0 Σ̄₀)

  int num_sigma_blocks() const { return N - 1; }
  int num_variables() const { return static_cast<int>(variables.size()); }
  int num_equalities() const { return static_cast<int>(equality_rhs.size()); }
};

SdpProgram build_sdp(const SteeringProblem& problem);

/// G_0 … G_{N−1} at an arbitrary point; Sigma holds N+1 matrices.
std::vector<Matrix> sdp_equality_residuals(const SteeringProblem& problem,
                                           const std::vector<Matrix>& Sigma,
                                           const std::vector<Matrix>& U,
                                           const std::vector<Matrix>& Y);

/// J̄_Σ at an arbitrary point (Σ₀ included).
double sdp_objective(const SteeringProblem& problem, const std::vector<Matrix>& Sigma,
                     const std::vector<Matrix>& Y);

struct SdpOptions {
  double barrier_mu0 = 1.0;
  double mu_reduction = 10.0;
  double tol_gap = 1e-9;  // on μ · (total cone dimension)
  int max_newton = 50;    // per centering
  double epsilon = 1e-3;  // noise inflation of the interior start, relative to its scale
  bool force_fallback = false;  // skip the inflated-noise start, use the big-M point
  Tolerances tol;
};

/// Residual report for the first-order conditions of the relaxed program.
struct KktReport {
  double sigma_stationarity = 0;   // Σ_k stationarity, k = 1 … N−1
  double sigma0_stationarity = 0;  // k = 0 row closed with the Σ₀ pin multiplier
  double gain_stationarity = 0;    // M_kK_k + B_kᵀΛ_kA_k
  double input_stationarity = 0;   // R_k + B_kᵀΛ_kB_k − M_k, M_k from the solver's dual block
  double equality = 0;             // max ‖G_k‖_F
  double multiplier_margin = 0;    // min_k λ_min(M_k), M_k = R_k + B_kᵀΛ_kB_k
  double complementarity = 0;      // max_k |tr(M_kᵀC_k)|
  double max_lossless_gap = 0;     // max_k λ_max(C_k)

  double max_residual() const;
};

struct SdpSolution {
  std::vector<Matrix> Sigma_seq;  // N+1, Σ₀ and Σ_N equal to the boundary data
  std::vector<Matrix> U_seq;      // N, p×n
  std::vector<Matrix> Y_seq;      // N, p×p
  double objective = 0;
  std::vector<double> lossless_gaps;  // λ_max(U_kΣ_k⁻¹U_kᵀ − Y_k)
  KktReport kkt;
  double barrier_mu_final = 0;

  std::vector<Matrix> Lambda_seq;  // N, multiplier of G_k
  Matrix sigma0_multiplier;        // multiplier of the Σ₀ pin
  std::vector<Matrix> M_seq;       // N, dual block paired with Y_k

  bool converged = false;
  bool used_fallback = false;
  int newton_steps = 0;
  int centerings = 0;
  double primal_infeasibility = 0;  // relative, at exit
  double dual_infeasibility = 0;
  double mean_qp_gap = 0;  // KKT-system mean solution vs closed forms
};

/// NotConverged, carrying the last iterate.
class SdpNotConverged : public SteeringError {
 public:
  SdpNotConverged(const std::string& message, SdpSolution last)
      : SteeringError(ErrorKind::NotConverged, message), last_(std::move(last)) {}
  const SdpSolution& last_iterate() const { return last_; }

 private:
  SdpSolution last_;
};

/**
 * Primal-dual barrier path following (HKM direction) on the relaxed program,
 * evaluated in binary128. Starts from the inflated-noise Newton solution, or
 * from a big-M point if that fails. Throws InfeasibleTarget, SdpNotConverged.
 */
SdpSolution solve_sdp(const SteeringProblem& problem, const SdpOptions& options = {});

KktReport kkt_residuals(const SteeringProblem& problem, const SdpSolution& solution);

/// K_k = U_kΣ_k⁻¹ plus closed-form mean half. Throws SingularCovariance.
Controller extract_controller(const SteeringProblem& problem, const SdpSolution& solution,
                              const Tolerances& tol = {});

/// Mean sub-problem as an equality-constrained QP solved through its KKT system.
MeanTrajectory solve_mean_qp(const SteeringProblem& problem);

/// SDPA sparse text; see README for block layout.
void write_sdpa(const SteeringProblem& problem, std::ostream& out);

}  // namespace covsteer
