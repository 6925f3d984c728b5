#include "covsteer/covariance_map.hpp"

#include "covsteer/errors.hpp"
#include "covsteer/riccati.hpp"

namespace covsteer {

MapEvaluation evaluate_map(const TransitionCache& cache, const Matrix& Pi0, bool with_jacobian,
                           const Tolerances& tol) {
  const SteeringProblem& p = cache.problem();
  const int N = p.N;
  const Eigen::Index n = p.n();
  if (Pi0.rows() != n || Pi0.cols() != n)
    throw SteeringError(ErrorKind::DimensionMismatch, "Pi0 must be n x n");

  bool inside = false;
  try {
    inside = check_feasibility(cache, Pi0, tol).feasible;
  } catch (const SteeringError& e) {
    if (e.kind() != ErrorKind::ConditionDisagreement) throw;
  }
  if (!inside)
    throw SteeringError(ErrorKind::InfeasiblePoint, "Pi0 is outside the feasible set");

  MapEvaluation ev;
  ev.Pi0 = Pi0;
  ev.W_seq.reserve(N + 1);
  ev.P_seq.reserve(N);
  ev.W_seq.push_back(Matrix::Zero(n, n));
  Matrix inner = p.Sigma0;
  Matrix F;
  for (int k = 1; k <= N; ++k) {
    const TransitionBlocks& b = cache.from_start(k);
    F = b.phi11 + b.phi12 * Pi0;
    const auto lu = F.partialPivLu();
    ev.W_seq.push_back(symmetrize(lu.solve(b.phi12)));
    const Matrix G = lu.solve(p.D[k - 1]);
    ev.P_seq.push_back(symmetrize(G * G.transpose()));
    inner += ev.P_seq.back();
  }
  ev.phi_N = F;
  ev.SigmaN = symmetrize(F * inner * F.transpose());

  if (with_jacobian) {
    const Matrix& WN = ev.W_seq[N];
    Matrix S = kron(p.Sigma0, WN) + kron(WN, p.Sigma0);
    for (int i = 0; i < N; ++i) {
      const Matrix dW = WN - ev.W_seq[i + 1];
      S += kron(ev.P_seq[i], dW) + kron(dW, ev.P_seq[i]);
    }
    ev.bracket = S;
    ev.jacobian = kron(F, F) * S;
  }
  return ev;
}

Matrix eval_f(const TransitionCache& cache, const Matrix& Pi0, const Tolerances& tol) {
  return evaluate_map(cache, Pi0, false, tol).SigmaN;
}

Matrix eval_jacobian(const TransitionCache& cache, const Matrix& Pi0, const Tolerances& tol) {
  return evaluate_map(cache, Pi0, true, tol).jacobian;
}

}  // namespace covsteer
