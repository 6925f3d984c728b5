#include "covsteer/mean_steering.hpp"

#include "covsteer/errors.hpp"

namespace covsteer {

namespace {

void check_controller(const SteeringProblem& p, const Controller& c) {
  const auto N = static_cast<std::size_t>(p.N);
  if (c.K_seq.size() != N || c.v_seq.size() != N || c.mu_seq.size() != N + 1)
    throw SteeringError(ErrorKind::DimensionMismatch, "controller horizon does not match problem");
  for (int k = 0; k < p.N; ++k) {
    if (c.K_seq[k].rows() != p.p() || c.K_seq[k].cols() != p.n() || c.v_seq[k].size() != p.p() ||
        c.mu_seq[k].size() != p.n())
      throw SteeringError(ErrorKind::DimensionMismatch, "controller dimensions do not match", k);
  }
}

}  // namespace

std::vector<Matrix> feedback_gains(const SteeringProblem& p, const RiccatiSolution& r) {
  std::vector<Matrix> K;
  K.reserve(p.N);
  for (int k = 0; k < p.N; ++k)
    K.push_back(-r.S[k].llt().solve(p.B[k].transpose() * r.Pi[k + 1] * p.A[k]));
  return K;
}

std::vector<Vector> psi_sequence(const TransitionCache& cache, const RiccatiSolution& r) {
  const SteeringProblem& p = cache.problem();
  const int N = p.N;
  const Matrix Gbar = closed_loop_gramian(cache, r, N, 0);
  const Matrix phiN0 = phi_Abar(cache, r, N, 0);
  const Vector psiN = Gbar.llt().solve(phiN0 * p.mu0 - p.muN);
  std::vector<Vector> psi;
  psi.reserve(N + 1);
  for (int k = 0; k <= N; ++k) psi.push_back(phi_Abar(cache, r, N, k).transpose() * psiN);
  return psi;
}

std::vector<Vector> psi_recursion(const SteeringProblem& p, const RiccatiSolution& r,
                                  const Vector& psiN) {
  const Eigen::Index n = p.n();
  std::vector<Vector> psi(p.N + 1);
  psi[p.N] = psiN;
  for (int k = p.N - 1; k >= 0; --k) {
    const Matrix BRB = p.B[k] * p.R[k].llt().solve(p.B[k].transpose());
    const Matrix M = Matrix::Identity(n, n) + r.Pi[k + 1] * BRB;
    psi[k] = p.A[k].transpose() * M.partialPivLu().solve(psi[k + 1]);
  }
  return psi;
}

MeanTrajectory mean_trajectory(const TransitionCache& cache) {
  const SteeringProblem& p = cache.problem();
  const int N = p.N;
  const TransitionBlocks& end = cache.from_start(N);
  const auto lu12 = end.phi12.partialPivLu();
  const Vector a = p.mu0;
  const Vector h = lu12.solve(end.phi11 * p.mu0);  // Φ₁₂(N,0)⁻¹Φ₁₁(N,0)μ̄₀
  const Vector g = lu12.solve(p.muN);              // Φ₁₂(N,0)⁻¹μ̄_N
  MeanTrajectory t;
  t.mu_seq.reserve(N + 1);
  t.v_seq.reserve(N);
  for (int k = 0; k <= N; ++k) {
    const TransitionBlocks& b = cache.from_start(k);
    t.mu_seq.push_back(b.phi11 * a - b.phi12 * h + b.phi12 * g);
  }
  for (int k = 0; k < N; ++k) {
    const TransitionBlocks& b = cache.from_start(k + 1);
    const Vector costate = b.phi21 * a - b.phi22 * h + b.phi22 * g;
    t.v_seq.push_back(-p.R[k].llt().solve(p.B[k].transpose() * costate));
  }
  // The endpoints are boundary data; pin them against round-off.
  t.mu_seq.front() = p.mu0;
  return t;
}

std::vector<Vector> mean_recursion(const SteeringProblem& p, const RiccatiSolution& r,
                                   const std::vector<Vector>& psi) {
  std::vector<Vector> mu;
  mu.reserve(p.N + 1);
  mu.push_back(p.mu0);
  for (int k = 0; k < p.N; ++k) {
    const Vector drive = p.B[k] * r.S[k].llt().solve(p.B[k].transpose() * psi[k + 1]);
    mu.push_back(closed_loop_A(p, r, k) * mu.back() - drive);
  }
  return mu;
}

Controller assemble_controller(const TransitionCache& cache, const RiccatiSolution& r) {
  const SteeringProblem& p = cache.problem();
  Controller c;
  c.K_seq = feedback_gains(p, r);
  MeanTrajectory t = mean_trajectory(cache);
  c.mu_seq = std::move(t.mu_seq);
  c.v_seq = std::move(t.v_seq);
  c.Sigma_seq = propagate_covariance(p, r, p.Sigma0);
  c.Pi0 = r.Pi0;
  return c;
}

Vector monolithic_control(const TransitionCache& cache, const RiccatiSolution& r, int k,
                          const Vector& x) {
  const SteeringProblem& p = cache.problem();
  if (k < 0 || k >= p.N)
    throw SteeringError(ErrorKind::IndexOutOfRange, "step index outside [0, N)", k);
  const Matrix phiN0 = phi_Abar(cache, r, p.N, 0);
  const Matrix Gbar = closed_loop_gramian(cache, r, p.N, 0);
  const Vector tail = phi_Abar(cache, r, p.N, k + 1).transpose() *
                      Gbar.llt().solve(phiN0 * p.mu0 - p.muN);
  const auto S = r.S[k].llt();
  return -S.solve(p.B[k].transpose() * r.Pi[k + 1] * p.A[k] * x) -
         S.solve(p.B[k].transpose() * tail);
}

void closed_loop_moments(const SteeringProblem& p, const Controller& c, std::vector<Vector>& mean,
                         std::vector<Matrix>& cov) {
  check_controller(p, c);
  mean.assign(1, p.mu0);
  cov.assign(1, p.Sigma0);
  for (int k = 0; k < p.N; ++k) {
    const Matrix Acl = p.A[k] + p.B[k] * c.K_seq[k];
    const Vector u = c.K_seq[k] * (mean.back() - c.mu_seq[k]) + c.v_seq[k];
    mean.push_back(p.A[k] * mean.back() + p.B[k] * u);
    cov.push_back(symmetrize(Acl * cov.back() * Acl.transpose() + p.D[k] * p.D[k].transpose()));
  }
}

double analytic_cost(const SteeringProblem& p, const Controller& c) {
  std::vector<Vector> mean;
  std::vector<Matrix> cov;
  closed_loop_moments(p, c, mean, cov);
  double J = 0.0;
  for (int k = 0; k < p.N; ++k) {
    const Matrix& K = c.K_seq[k];
    const Vector u = K * (mean[k] - c.mu_seq[k]) + c.v_seq[k];
    J += (p.Q[k] * cov[k]).trace() + mean[k].dot(p.Q[k] * mean[k]) +
         (p.R[k] * K * cov[k] * K.transpose()).trace() + u.dot(p.R[k] * u);
  }
  return J;
}

}  // namespace covsteer
