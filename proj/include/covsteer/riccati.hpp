#pragma once

#include <vector>

#include "covsteer/symplectic.hpp"

namespace covsteer {

/// Riccati sequence Π₀…Π_N generated from Π₀ through the transition blocks.
struct RiccatiSolution {
  Matrix Pi0;
  std::vector<Matrix> Pi;        // N+1 entries
  std::vector<Matrix> S;         // R_k + B_kᵀ Π_{k+1} B_k, N entries
  std::vector<double> S_margin;  // pd_margin of each S_k
  bool feasible = false;         // every S_k ≻ 0
  int failing_step = -1;         // first k with S_k not ≻ 0
  double max_asymmetry = 0.0;    // before symmetrization
  bool conditioning_flag = false;
};

/// Π_k = (Φ₂₁ + Φ₂₂Π₀)(Φ₁₁ + Φ₁₂Π₀)⁻¹ at (k, 0). Throws NoSolution(k) on a singular factor.
RiccatiSolution pi_from_pi0(const TransitionCache& cache, const Matrix& Pi0,
                            const Tolerances& tol = {});

/// One backward step of the Riccati difference equation. Throws SingularStep.
Matrix pi_backward_step(const SteeringProblem& problem, int k, const Matrix& Pi_next,
                        const Tolerances& tol = {});

/// Π_k from Π_l with transition blocks anchored at l.
Matrix pi_anchored(const TransitionCache& cache, const Matrix& Pi_l, int l, int k);

/// Φ₂₁Φ₁₁⁻¹ + Φ₁₁⁻ᵀΠ₀(I + Φ₁₁⁻¹Φ₁₂Π₀)⁻¹Φ₁₁⁻¹ at (k, 0).
Matrix pi_alternative_form(const TransitionCache& cache, const Matrix& Pi0, int k);

/// T_k and L_k (k = 0…N−1) of the feasibility block, with R absorbed.
struct FeasibilityFactors {
  std::vector<Matrix> T, L;
};
FeasibilityFactors feasibility_factors(const TransitionCache& cache);

/// U_k = blkdiag(T_k,…,T_0) − [L_k … L_0]ᵀ Π₀ [L_k … L_0].
Matrix feasibility_block(const TransitionCache& cache, const FeasibilityFactors& factors,
                         const Matrix& Pi0, int k);

/**
 * Three equivalent membership tests for the feasible set:
 *  boundary  Π_b − Π₀ ≻ 0,
 *  factor    U_{N−1} ≻ 0 (Cholesky with the pd margin),
 *  spectrum  eig(I + Φ₁₁(k,0)⁻¹Φ₁₂(k,0)Π₀) real positive for k = 1…N.
 * Margins are scale-normalized. When the verdicts differ and every margin is
 * outside the band, ConditionDisagreement is thrown; inside the band the
 * boundary test decides and agree is false.
 */
struct FeasibilityCertificate {
  bool feasible = false;
  bool boundary_test = false;
  bool factor_test = false;
  bool spectrum_test = false;
  bool agree = false;
  double boundary_margin = 0.0;
  double factor_margin = 0.0;
  double spectrum_margin = 0.0;
  double spectrum_imag = 0.0;
};

inline constexpr double kMarginBand = 1e-8;

FeasibilityCertificate check_feasibility(const TransitionCache& cache, const Matrix& Pi0,
                                         const Tolerances& tol = {},
                                         double band = kMarginBand);

/// (I + B_k R_k⁻¹ B_kᵀ Π_{k+1})⁻¹ A_k.
Matrix closed_loop_A(const SteeringProblem& problem, const RiccatiSolution& riccati, int k);

/// Φ₁₁(k,s) + Φ₁₂(k,s)Π_s.
Matrix phi_Abar(const TransitionCache& cache, const RiccatiSolution& riccati, int k, int s);

/// Same transition by explicit products of Ā factors (inverses when k < s).
Matrix phi_Abar_product(const SteeringProblem& problem, const RiccatiSolution& riccati, int k,
                        int s);

/// Σ_{k+1} = Ā_k Σ_k Ā_kᵀ + D_k D_kᵀ; returns N+1 matrices.
std::vector<Matrix> propagate_covariance(const SteeringProblem& problem,
                                         const RiccatiSolution& riccati, const Matrix& Sigma0);

/// Non-recursive form through Φ_Ā.
std::vector<Matrix> covariance_closed_form(const TransitionCache& cache,
                                           const RiccatiSolution& riccati,
                                           const Matrix& Sigma0);

/// Ḡ(k,s) as the sum over Φ_Ā(k,i+1) B̄_i B̄_iᵀ Φ_Ā(k,i+1)ᵀ, B̄ = B(R + BᵀΠB)^{-1/2}.
Matrix closed_loop_gramian(const TransitionCache& cache, const RiccatiSolution& riccati, int k,
                           int s);

}  // namespace covsteer
