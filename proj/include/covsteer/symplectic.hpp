#pragma once

#include <vector>

#include "covsteer/problem.hpp"

namespace covsteer {

/// The four n×n blocks of Φ_M(k, s).
struct TransitionBlocks {
  Matrix phi11, phi12, phi21, phi22;
  int k = 0;
  int s = 0;

  Matrix full() const;
  static TransitionBlocks from_full(const Matrix& m, int k, int s);
};

/// B_k R_k^{-1/2}.
Matrix normalized_input(const SteeringProblem& problem, int k);

/// Hamiltonian step M_k (with R_k absorbed into B_k). Requires 0 <= k < N.
Matrix build_M(const SteeringProblem& problem, int k);

/// Closed-form inverse of M_k; never a generic inversion.
Matrix build_M_inverse(const SteeringProblem& problem, int k);

/// Φ_M(k, s) by explicit products (inverse factors when k < s).
TransitionBlocks phi_M(const SteeringProblem& problem, int k, int s);

/**
 * Per-problem cache of the transition blocks every downstream module uses:
 * Φ_M(k, 0) and Φ_M(N, k) for all k, plus A_k⁻¹ and the R-absorbed inputs.
 *
 * Immutable once constructed; safe to share between threads.
 */
class TransitionCache {
 public:
  explicit TransitionCache(SteeringProblem problem);

  const SteeringProblem& problem() const { return problem_; }
  int N() const { return problem_.N; }
  Eigen::Index n() const { return problem_.n(); }

  const TransitionBlocks& from_start(int k) const;  // Φ_M(k, 0)
  const TransitionBlocks& to_end(int k) const;      // Φ_M(N, k)
  /// Any (k, s); served from the cache when s = 0 or k = N.
  TransitionBlocks blocks(int k, int s) const;

  const Matrix& input_hat(int k) const { return Bhat_.at(k); }
  const Matrix& A_inverse(int k) const { return Ainv_.at(k); }

  /// X = −Φ₁₁(N,0)⁻¹Φ₁₂(N,0), symmetrized.
  const Matrix& reach() const { return reach_; }

  /// Π_b = X⁻¹; throws NotControllable when X fails the strict PD test.
  Matrix boundary_matrix(const Tolerances& tol = {}) const;

  /// Largest relative defect of Φ₁₁ᵀΦ₂₂ − Φ₂₁ᵀΦ₁₂ = I over the cached Φ_M(k,0).
  double symplectic_defect() const { return defect_; }
  bool ill_conditioned() const { return defect_ > 1e-8; }

 private:
  SteeringProblem problem_;
  std::vector<Matrix> Bhat_, Ainv_, M_, Minv_;
  std::vector<TransitionBlocks> from_start_, to_end_;
  Matrix reach_;
  double defect_ = 0.0;
};

/// Convenience wrapper: builds a cache and returns its boundary matrix.
Matrix boundary_matrix(const SteeringProblem& problem, const Tolerances& tol = {});

}  // namespace covsteer
