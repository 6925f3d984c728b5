#include "covsteer/newton.hpp"

#include <cmath>
#include <sstream>

#include "covsteer/covariance_map.hpp"
#include "covsteer/errors.hpp"
#include "covsteer/riccati.hpp"

namespace covsteer {

namespace {

constexpr double kSingularJacobian = 1e-15;
constexpr double kConditionReport = 1e12;
constexpr double kRoundoffFloor = 1e-9;

bool feasible(const TransitionCache& cache, const Matrix& Pi0, const Tolerances& tol) {
  try {
    return check_feasibility(cache, Pi0, tol).feasible;
  } catch (const SteeringError& e) {
    if (e.kind() == ErrorKind::ConditionDisagreement) return false;
    throw;
  }
}

}  // namespace

Matrix default_initial_guess(const TransitionCache& cache, const Tolerances& tol) {
  const Matrix Pb = cache.boundary_matrix(tol);
  Eigen::SelfAdjointEigenSolver<Matrix> es(Pb, Eigen::EigenvaluesOnly);
  const double positive = es.eigenvalues().cwiseMax(0.0).sum();
  const double c = positive / static_cast<double>(cache.n()) + 1.0;
  return symmetrize(Pb - c * Matrix::Identity(cache.n(), cache.n()));
}

NewtonReport solve_newton(const TransitionCache& cache, const NewtonOptions& opt) {
  const SteeringProblem& p = cache.problem();
  const Eigen::Index n = p.n();
  const Matrix& target = p.SigmaN;
  const Matrix& Dl = p.D.back();
  const double target_margin = pd_margin(target - Dl * Dl.transpose());
  if (target_margin < opt.tol.pd) {
    std::ostringstream os;
    os << "SigmaN - D_{N-1} D_{N-1}^T is not positive definite (margin " << target_margin << ")";
    throw SteeringError(ErrorKind::InfeasibleTarget, os.str(), p.N - 1);
  }

  Matrix Pi = opt.initial_guess ? symmetrize(*opt.initial_guess)
                                : default_initial_guess(cache, opt.tol);
  if (!feasible(cache, Pi, opt.tol))
    throw SteeringError(ErrorKind::InfeasiblePoint, "initial guess is outside the feasible set");

  const double stop = opt.tol_residual * (1.0 + target.norm());
  const double local = 1e-2 * target.norm();
  // Below this the residual is dominated by round-off in f, so ratios say nothing.
  const double floor = kRoundoffFloor * (1.0 + target.norm());

  NewtonReport rep;
  MapEvaluation ev = evaluate_map(cache, Pi, true, opt.tol);
  double res = (ev.SigmaN - target).norm();
  rep.history.push_back({Pi, res, 0.0, 0.0});

  for (int it = 0;; ++it) {
    if (res <= stop) {
      rep.converged = true;
      break;
    }
    if (it >= opt.max_iter) {
      rep.Pi0_star = Pi;
      rep.residual = res;
      throw SteeringError(ErrorKind::MaxIterationsExceeded,
                          "Newton iteration limit reached, residual " + std::to_string(res));
    }

    const double ratio = singular_ratio(ev.jacobian);
    const double cond = ratio > 0.0 ? 1.0 / ratio : INFINITY;
    rep.history.back().jacobian_condition = cond;
    if (cond > kConditionReport) rep.ill_conditioned = true;
    if (ratio <= kSingularJacobian) {
      std::ostringstream os;
      os << "Jacobian is singular at iteration " << it << " (condition " << cond << ")";
      throw SteeringError(ErrorKind::JacobianSingular, os.str(), it);
    }

    const Vector rhs = vec(ev.SigmaN - target);
    const Matrix step = symmetrize(unvec(-ev.jacobian.partialPivLu().solve(rhs), n));

    double alpha = 1.0;
    bool accepted = false;
    for (int h = 0; h <= opt.max_halvings; ++h, alpha *= 0.5) {
      const Matrix trial = symmetrize(Pi + alpha * step);
      if (!feasible(cache, trial, opt.tol)) continue;
      MapEvaluation tev = evaluate_map(cache, trial, true, opt.tol);
      const double tres = (tev.SigmaN - target).norm();
      if (!(tres < res)) continue;
      if (res < local && tres > floor) rep.quadratic_ratios.push_back(tres / (res * res));
      Pi = trial;
      ev = std::move(tev);
      res = tres;
      accepted = true;
      break;
    }
    if (!accepted)
      throw SteeringError(ErrorKind::MaxIterationsExceeded,
                          "line search exhausted " + std::to_string(opt.max_halvings) +
                              " halvings at iteration " + std::to_string(it),
                          it);
    rep.history.push_back({Pi, res, alpha, 0.0});
  }
  rep.Pi0_star = Pi;
  rep.residual = res;
  return rep;
}

}  // namespace covsteer
