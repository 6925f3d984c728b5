#include "covsteer/riccati.hpp"

#include <algorithm>
#include <cmath>

#include "covsteer/errors.hpp"

namespace covsteer {

namespace {

// X F⁻¹ without forming the inverse.
Matrix right_solve(const Matrix& X, const Matrix& F) {
  return F.transpose().partialPivLu().solve(X.transpose()).transpose();
}

Matrix input_gain_matrix(const SteeringProblem& p, int k) {
  return p.B[k] * p.R[k].llt().solve(p.B[k].transpose());
}

}  // namespace

RiccatiSolution pi_from_pi0(const TransitionCache& cache, const Matrix& Pi0,
                            const Tolerances& tol) {
  const SteeringProblem& p = cache.problem();
  const int N = p.N;
  RiccatiSolution sol;
  sol.Pi0 = Pi0;
  sol.Pi.reserve(N + 1);
  for (int k = 0; k <= N; ++k) {
    const TransitionBlocks& b = cache.from_start(k);
    const Matrix F = b.phi11 + b.phi12 * Pi0;
    if (singular_ratio(F) <= tol.singular)
      throw SteeringError(ErrorKind::NoSolution,
                          "Phi11(k,0) + Phi12(k,0) Pi0 is singular at k = " + std::to_string(k),
                          k);
    const Matrix Pk = right_solve(b.phi21 + b.phi22 * Pi0, F);
    sol.max_asymmetry = std::max(sol.max_asymmetry, relative_asymmetry(Pk));
    sol.Pi.push_back(symmetrize(Pk));
  }
  sol.conditioning_flag = sol.max_asymmetry > 1e-8 || cache.ill_conditioned();

  sol.feasible = true;
  sol.S.reserve(N);
  for (int k = 0; k < N; ++k) {
    Matrix S = symmetrize(p.R[k] + p.B[k].transpose() * sol.Pi[k + 1] * p.B[k]);
    const double m = pd_margin(S);
    sol.S_margin.push_back(m);
    if (m < tol.pd && sol.feasible) {
      sol.feasible = false;
      sol.failing_step = k;
    }
    sol.S.push_back(std::move(S));
  }
  return sol;
}

Matrix pi_backward_step(const SteeringProblem& p, int k, const Matrix& Pi_next,
                        const Tolerances& tol) {
  if (k < 0 || k >= p.N)
    throw SteeringError(ErrorKind::IndexOutOfRange, "step index outside [0, N)", k);
  const Eigen::Index n = p.n();
  const Matrix resolvent = Matrix::Identity(n, n) + input_gain_matrix(p, k) * Pi_next;
  if (singular_ratio(resolvent) <= tol.singular)
    throw SteeringError(ErrorKind::SingularStep,
                        "I + B R^-1 B^T Pi_{k+1} is singular at k = " + std::to_string(k), k);
  const Matrix Pk =
      p.A[k].transpose() * right_solve(Pi_next, resolvent) * p.A[k] + p.Q[k];
  return symmetrize(Pk);
}

Matrix pi_anchored(const TransitionCache& cache, const Matrix& Pi_l, int l, int k) {
  const TransitionBlocks b = cache.blocks(k, l);
  return symmetrize(right_solve(b.phi21 + b.phi22 * Pi_l, b.phi11 + b.phi12 * Pi_l));
}

Matrix pi_alternative_form(const TransitionCache& cache, const Matrix& Pi0, int k) {
  const TransitionBlocks& b = cache.from_start(k);
  const Eigen::Index n = cache.n();
  const auto lu11 = b.phi11.partialPivLu();
  const Matrix inv11 = lu11.inverse();
  const Matrix inner = Matrix::Identity(n, n) + inv11 * b.phi12 * Pi0;
  const Matrix head = right_solve(b.phi21, b.phi11);
  const Matrix tail = inv11.transpose() * Pi0 * inner.partialPivLu().solve(inv11);
  return symmetrize(head + tail);
}

FeasibilityFactors feasibility_factors(const TransitionCache& cache) {
  const SteeringProblem& p = cache.problem();
  const Eigen::Index m = p.p();
  FeasibilityFactors f;
  for (int k = 0; k < p.N; ++k) {
    const TransitionBlocks& b = cache.from_start(k);
    const auto lu11 = b.phi11.partialPivLu();
    const Matrix AiBh = cache.A_inverse(k) * cache.input_hat(k);
    const Matrix ratio = right_solve(b.phi21, b.phi11);  // Φ₂₁Φ₁₁⁻¹
    f.L.push_back(lu11.solve(AiBh));
    f.T.push_back(symmetrize(Matrix::Identity(m, m) +
                             AiBh.transpose() * (p.Q[k] - ratio) * AiBh));
  }
  return f;
}

Matrix feasibility_block(const TransitionCache& cache, const FeasibilityFactors& f,
                         const Matrix& Pi0, int k) {
  const Eigen::Index m = cache.problem().p();
  const Eigen::Index n = cache.n();
  const Eigen::Index size = m * (k + 1);
  Matrix L(n, size);
  Matrix U = Matrix::Zero(size, size);
  for (int j = 0; j <= k; ++j) {
    const int step = k - j;  // blocks ordered T_k, …, T_0
    L.middleCols(j * m, m) = f.L[step];
    U.block(j * m, j * m, m, m) = f.T[step];
  }
  U -= L.transpose() * Pi0 * L;
  return symmetrize(U);
}

FeasibilityCertificate check_feasibility(const TransitionCache& cache, const Matrix& Pi0,
                                         const Tolerances& tol, double band) {
  const int N = cache.N();
  const Eigen::Index n = cache.n();
  FeasibilityCertificate c;

  const Matrix Pb = cache.boundary_matrix(tol);
  c.boundary_margin = pd_margin(Pb - Pi0);
  c.boundary_test = c.boundary_margin >= tol.pd;

  const Matrix U = feasibility_block(cache, feasibility_factors(cache), Pi0, N - 1);
  const SymmetricSpectrum su = spectrum(U);
  c.factor_margin = su.min / (1.0 + su.abs_max);
  const Matrix shifted =
      U - tol.pd * (1.0 + su.abs_max) * Matrix::Identity(U.rows(), U.cols());
  c.factor_test = shifted.llt().info() == Eigen::Success;

  c.spectrum_margin = INFINITY;
  for (int k = 1; k <= N; ++k) {
    const TransitionBlocks& b = cache.from_start(k);
    const Matrix E =
        Matrix::Identity(n, n) + b.phi11.partialPivLu().solve(b.phi12) * Pi0;
    Eigen::EigenSolver<Matrix> es(E, false);
    const Eigen::VectorXcd ev = es.eigenvalues();
    const double re_min = ev.real().minCoeff();
    const double abs_max = ev.cwiseAbs().maxCoeff();
    c.spectrum_margin = std::min(c.spectrum_margin, re_min / (1.0 + abs_max));
    c.spectrum_imag = std::max(c.spectrum_imag, ev.imag().cwiseAbs().maxCoeff());
  }
  c.spectrum_test = c.spectrum_margin >= tol.pd && c.spectrum_imag < 1e-8;

  c.agree = c.boundary_test == c.factor_test && c.factor_test == c.spectrum_test;
  c.feasible = c.boundary_test;
  if (!c.agree) {
    const double closest = std::min({std::abs(c.boundary_margin), std::abs(c.factor_margin),
                                     std::abs(c.spectrum_margin)});
    if (closest >= band)
      throw SteeringError(ErrorKind::ConditionDisagreement,
                          "feasibility tests disagree outside the margin band");
  }
  return c;
}

Matrix closed_loop_A(const SteeringProblem& p, const RiccatiSolution& ric, int k) {
  if (k < 0 || k >= p.N)
    throw SteeringError(ErrorKind::IndexOutOfRange, "step index outside [0, N)", k);
  const Eigen::Index n = p.n();
  const Matrix resolvent = Matrix::Identity(n, n) + input_gain_matrix(p, k) * ric.Pi[k + 1];
  return resolvent.partialPivLu().solve(p.A[k]);
}

Matrix phi_Abar(const TransitionCache& cache, const RiccatiSolution& ric, int k, int s) {
  const TransitionBlocks b = cache.blocks(k, s);
  return b.phi11 + b.phi12 * ric.Pi[s];
}

Matrix phi_Abar_product(const SteeringProblem& p, const RiccatiSolution& ric, int k, int s) {
  if (k < 0 || k > p.N || s < 0 || s > p.N)
    throw SteeringError(ErrorKind::IndexOutOfRange, "time index outside [0, N]");
  const Eigen::Index n = p.n();
  Matrix phi = Matrix::Identity(n, n);
  if (s < k) {
    for (int i = s; i < k; ++i) phi = closed_loop_A(p, ric, i) * phi;
  } else {
    for (int i = k; i < s; ++i) phi = phi * closed_loop_A(p, ric, i).partialPivLu().inverse();
  }
  return phi;
}

std::vector<Matrix> propagate_covariance(const SteeringProblem& p, const RiccatiSolution& ric,
                                         const Matrix& Sigma0) {
  std::vector<Matrix> out;
  out.reserve(p.N + 1);
  out.push_back(Sigma0);
  for (int k = 0; k < p.N; ++k) {
    const Matrix Ab = closed_loop_A(p, ric, k);
    out.push_back(symmetrize(Ab * out.back() * Ab.transpose() + p.D[k] * p.D[k].transpose()));
  }
  return out;
}

std::vector<Matrix> covariance_closed_form(const TransitionCache& cache,
                                           const RiccatiSolution& ric, const Matrix& Sigma0) {
  const SteeringProblem& p = cache.problem();
  std::vector<Matrix> out;
  out.reserve(p.N + 1);
  for (int k = 0; k <= p.N; ++k) {
    const Matrix F = phi_Abar(cache, ric, k, 0);
    Matrix S = F * Sigma0 * F.transpose();
    for (int i = 0; i < k; ++i) {
      const Matrix G = phi_Abar(cache, ric, k, i + 1) * p.D[i];
      S += G * G.transpose();
    }
    out.push_back(symmetrize(S));
  }
  return out;
}

Matrix closed_loop_gramian(const TransitionCache& cache, const RiccatiSolution& ric, int k,
                           int s) {
  const SteeringProblem& p = cache.problem();
  const Eigen::Index n = cache.n();
  Matrix g = Matrix::Zero(n, n);
  const int lo = std::min(k, s);
  const int hi = std::max(k, s);
  for (int i = lo; i < hi; ++i) {
    const Matrix F = phi_Abar(cache, ric, k, i + 1) * p.B[i];
    g += F * ric.S[i].llt().solve(F.transpose());
  }
  g = symmetrize(g);
  return k < s ? Matrix(-g) : g;
}

}  // namespace covsteer
