#pragma once

#include <vector>

#include "covsteer/riccati.hpp"

namespace covsteer {

/// Affine feedback u_k = K_k (x_k − μ_k) + v_k with its predicted moments.
struct Controller {
  std::vector<Matrix> K_seq;      // N, p×n
  std::vector<Vector> v_seq;      // N, p
  std::vector<Vector> mu_seq;     // N+1, n
  std::vector<Matrix> Sigma_seq;  // N+1, n×n
  Matrix Pi0;                     // may be empty for controllers not built from Π₀

  int N() const { return static_cast<int>(K_seq.size()); }
};

/// K_k = −(R_k + B_kᵀΠ_{k+1}B_k)⁻¹B_kᵀΠ_{k+1}A_k.
std::vector<Matrix> feedback_gains(const SteeringProblem& problem, const RiccatiSolution& riccati);

/// ψ_0…ψ_N from ψ_N = Ḡ(N,0)⁻¹(Φ_Ā(N,0)μ̄₀ − μ̄_N) and ψ_k = Φ_Ā(N,k)ᵀψ_N.
std::vector<Vector> psi_sequence(const TransitionCache& cache, const RiccatiSolution& riccati);

/// Backward recursion ψ_k = A_kᵀ(I + Π_{k+1}B_kR_k⁻¹B_kᵀ)⁻¹ψ_{k+1} from a given ψ_N.
std::vector<Vector> psi_recursion(const SteeringProblem& problem, const RiccatiSolution& riccati,
                                  const Vector& psiN);

struct MeanTrajectory {
  std::vector<Vector> mu_seq;  // N+1
  std::vector<Vector> v_seq;   // N
};

/// Closed forms in the transition blocks; independent of Π₀ and of the covariances.
MeanTrajectory mean_trajectory(const TransitionCache& cache);

/// μ_{k+1} = Ā_kμ_k − B_kS_k⁻¹B_kᵀψ_{k+1}, starting from μ̄₀.
std::vector<Vector> mean_recursion(const SteeringProblem& problem, const RiccatiSolution& riccati,
                                   const std::vector<Vector>& psi);

Controller assemble_controller(const TransitionCache& cache, const RiccatiSolution& riccati);

/// u*_k(x) = −S_k⁻¹B_kᵀΠ_{k+1}A_k x − S_k⁻¹B_kᵀψ_{k+1}.
Vector monolithic_control(const TransitionCache& cache, const RiccatiSolution& riccati, int k,
                          const Vector& x);

/// Expected cost of an arbitrary affine controller, from moments recomputed under its gains.
double analytic_cost(const SteeringProblem& problem, const Controller& controller);

/// Moments of x_k under the controller (mean m_k, covariance Σ_k), recomputed from scratch.
void closed_loop_moments(const SteeringProblem& problem, const Controller& controller,
                         std::vector<Vector>& mean, std::vector<Matrix>& cov);

}  // namespace covsteer
