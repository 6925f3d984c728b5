#pragma once

#include <vector>

#include "covsteer/symplectic.hpp"

namespace covsteer {

/// f(Π₀) = Σ_N together with the pieces of its Jacobian.
struct MapEvaluation {
  Matrix Pi0;
  Matrix SigmaN;
  Matrix jacobian;             // n²×n², empty unless requested
  std::vector<Matrix> W_seq;   // W_{k,0} = (Φ₁₁(k,0) + Φ₁₂(k,0)Π₀)⁻¹Φ₁₂(k,0), k = 0…N
  std::vector<Matrix> P_seq;   // P_i = Φ_Ā(i+1,0)⁻¹D_iD_iᵀΦ_Ā(i+1,0)⁻ᵀ, i = 0…N−1
  Matrix bracket;              // the Kronecker sum multiplied by Φ_Ā(N,0)⊗Φ_Ā(N,0)
  Matrix phi_N;                // Φ_Ā(N,0)
};

/// Full evaluation. Throws InfeasiblePoint when Π₀ is outside the feasible set.
MapEvaluation evaluate_map(const TransitionCache& cache, const Matrix& Pi0,
                           bool with_jacobian = true, const Tolerances& tol = {});

Matrix eval_f(const TransitionCache& cache, const Matrix& Pi0, const Tolerances& tol = {});

/// ∂vec(f)/∂vec(Π₀), column-major vec.
Matrix eval_jacobian(const TransitionCache& cache, const Matrix& Pi0, const Tolerances& tol = {});

}  // namespace covsteer
