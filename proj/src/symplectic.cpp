#include "covsteer/symplectic.hpp"

#include <algorithm>

#include "covsteer/errors.hpp"

namespace covsteer {

Matrix TransitionBlocks::full() const {
  const Eigen::Index n = phi11.rows();
  Matrix m(2 * n, 2 * n);
  m << phi11, phi12, phi21, phi22;
  return m;
}

TransitionBlocks TransitionBlocks::from_full(const Matrix& m, int k, int s) {
  const Eigen::Index n = m.rows() / 2;
  return {m.topLeftCorner(n, n), m.topRightCorner(n, n), m.bottomLeftCorner(n, n),
          m.bottomRightCorner(n, n), k, s};
}

namespace {

void check_step(const SteeringProblem& p, int k) {
  if (k < 0 || k >= p.N)
    throw SteeringError(ErrorKind::IndexOutOfRange,
                        "step index " + std::to_string(k) + " outside [0, N)", k);
}

void check_time(const SteeringProblem& p, int k) {
  if (k < 0 || k > p.N)
    throw SteeringError(ErrorKind::IndexOutOfRange,
                        "time index " + std::to_string(k) + " outside [0, N]", k);
}

Matrix assemble_M(const Matrix& A, const Matrix& Ainv, const Matrix& Bhat, const Matrix& Q) {
  const Eigen::Index n = A.rows();
  const Matrix AinvT = Ainv.transpose();
  const Matrix BB = Bhat * Bhat.transpose();
  Matrix M(2 * n, 2 * n);
  M << A + BB * AinvT * Q, -BB * AinvT, -AinvT * Q, AinvT;
  return M;
}

Matrix assemble_M_inverse(const Matrix& A, const Matrix& Ainv, const Matrix& Bhat,
                          const Matrix& Q) {
  const Eigen::Index n = A.rows();
  const Matrix BB = Bhat * Bhat.transpose();
  Matrix Mi(2 * n, 2 * n);
  Mi << Ainv, Ainv * BB, Q * Ainv, A.transpose() + Q * Ainv * BB;
  return Mi;
}

double identity_defect(const TransitionBlocks& b) {
  const Eigen::Index n = b.phi11.rows();
  const Matrix lhs = b.phi11.transpose() * b.phi22 - b.phi21.transpose() * b.phi12;
  const double scale =
      1.0 + b.phi11.norm() * b.phi22.norm() + b.phi21.norm() * b.phi12.norm();
  return (lhs - Matrix::Identity(n, n)).norm() / scale;
}

}  // namespace

Matrix normalized_input(const SteeringProblem& p, int k) {
  check_step(p, k);
  return p.B[k] * inverse_sqrt_spd(p.R[k]);
}

Matrix build_M(const SteeringProblem& p, int k) {
  check_step(p, k);
  const Matrix Ainv = p.A[k].partialPivLu().inverse();
  return assemble_M(p.A[k], Ainv, normalized_input(p, k), p.Q[k]);
}

Matrix build_M_inverse(const SteeringProblem& p, int k) {
  check_step(p, k);
  const Matrix Ainv = p.A[k].partialPivLu().inverse();
  return assemble_M_inverse(p.A[k], Ainv, normalized_input(p, k), p.Q[k]);
}

TransitionBlocks phi_M(const SteeringProblem& p, int k, int s) {
  check_time(p, k);
  check_time(p, s);
  const Eigen::Index n = p.n();
  Matrix phi = Matrix::Identity(2 * n, 2 * n);
  if (s < k) {
    for (int i = s; i < k; ++i) phi = build_M(p, i) * phi;
  } else {
    for (int i = k; i < s; ++i) phi = phi * build_M_inverse(p, i);
  }
  return TransitionBlocks::from_full(phi, k, s);
}

TransitionCache::TransitionCache(SteeringProblem problem) : problem_(std::move(problem)) {
  const int N = problem_.N;
  const Eigen::Index n = problem_.n();
  Bhat_.reserve(N);
  Ainv_.reserve(N);
  M_.reserve(N);
  Minv_.reserve(N);
  for (int k = 0; k < N; ++k) {
    Ainv_.push_back(problem_.A[k].partialPivLu().inverse());
    Bhat_.push_back(problem_.B[k] * inverse_sqrt_spd(problem_.R[k]));
    M_.push_back(assemble_M(problem_.A[k], Ainv_[k], Bhat_[k], problem_.Q[k]));
    Minv_.push_back(assemble_M_inverse(problem_.A[k], Ainv_[k], Bhat_[k], problem_.Q[k]));
  }

  from_start_.reserve(N + 1);
  Matrix phi = Matrix::Identity(2 * n, 2 * n);
  from_start_.push_back(TransitionBlocks::from_full(phi, 0, 0));
  for (int k = 0; k < N; ++k) {
    phi = M_[k] * phi;
    from_start_.push_back(TransitionBlocks::from_full(phi, k + 1, 0));
  }

  to_end_.resize(N + 1);
  phi = Matrix::Identity(2 * n, 2 * n);
  to_end_[N] = TransitionBlocks::from_full(phi, N, N);
  for (int k = N - 1; k >= 0; --k) {
    phi = phi * M_[k];
    to_end_[k] = TransitionBlocks::from_full(phi, N, k);
  }

  for (const auto& b : from_start_) defect_ = std::max(defect_, identity_defect(b));

  const TransitionBlocks& end = from_start_[N];
  reach_ = symmetrize(-end.phi11.partialPivLu().solve(end.phi12));
}

const TransitionBlocks& TransitionCache::from_start(int k) const {
  check_time(problem_, k);
  return from_start_[k];
}

const TransitionBlocks& TransitionCache::to_end(int k) const {
  check_time(problem_, k);
  return to_end_[k];
}

TransitionBlocks TransitionCache::blocks(int k, int s) const {
  check_time(problem_, k);
  check_time(problem_, s);
  if (s == 0) return from_start_[k];
  if (k == problem_.N) return to_end_[s];
  const Eigen::Index n = problem_.n();
  Matrix phi = Matrix::Identity(2 * n, 2 * n);
  if (s < k) {
    for (int i = s; i < k; ++i) phi = M_[i] * phi;
  } else {
    for (int i = k; i < s; ++i) phi = phi * Minv_[i];
  }
  return TransitionBlocks::from_full(phi, k, s);
}

Matrix TransitionCache::boundary_matrix(const Tolerances& tol) const {
  const double margin = pd_margin(reach_);
  if (margin < tol.pd)
    throw SteeringError(ErrorKind::NotControllable,
                        "-Phi11(N,0)^-1 Phi12(N,0) is not positive definite (margin " +
                            std::to_string(margin) + ")");
  return symmetrize(reach_.llt().solve(Matrix::Identity(n(), n())));
}

Matrix boundary_matrix(const SteeringProblem& problem, const Tolerances& tol) {
  return TransitionCache(problem).boundary_matrix(tol);
}

}  // namespace covsteer
