#pragma once

#include <optional>
#include <vector>

#include "covsteer/symplectic.hpp"

namespace covsteer {

struct NewtonOptions {
  double tol_residual = 1e-10;  // on ‖f(Π₀) − Σ̄_N‖_F / (1 + ‖Σ̄_N‖_F)
  int max_iter = 100;
  int max_halvings = 40;
  std::optional<Matrix> initial_guess;
  Tolerances tol;
};

struct NewtonIterate {
  Matrix Pi0;
  double residual = 0.0;  // ‖f(Π₀) − Σ̄_N‖_F
  double damping = 1.0;   // step fraction that produced this iterate (0 for the start)
  double jacobian_condition = 0.0;  // of the Jacobian used to leave this iterate
};

struct NewtonReport {
  Matrix Pi0_star;
  std::vector<NewtonIterate> history;  // history[0] is the initial guess
  bool converged = false;
  double residual = 0.0;
  // r_{i+1}/r_i² for steps starting below 1e-2‖Σ̄_N‖ and ending above the round-off
  // floor 1e-9(1+‖Σ̄_N‖).
  std::vector<double> quadratic_ratios;
  bool ill_conditioned = false;          // some Jacobian had condition > 1e12

  int iterations() const { return static_cast<int>(history.size()) - 1; }
};

/// Π_b − c·I with c = (sum of positive eigenvalues of Π_b)/n + 1.
Matrix default_initial_guess(const TransitionCache& cache, const Tolerances& tol = {});

/**
 * Damped Newton iteration on f(Π₀) = Σ̄_N. Each step halves until the trial
 * point is feasible and the residual drops.
 *
 * Throws InfeasibleTarget, InfeasiblePoint (bad guess), JacobianSingular,
 * MaxIterationsExceeded.
 */
NewtonReport solve_newton(const TransitionCache& cache, const NewtonOptions& options = {});

}  // namespace covsteer
