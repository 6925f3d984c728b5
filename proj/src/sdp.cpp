#include "covsteer/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "covsteer/newton.hpp"
#include "sdp_core.hpp"

namespace covsteer {

namespace {

using detail::quad;
using QMat = Eigen::Matrix<quad, Eigen::Dynamic, Eigen::Dynamic>;

void check_target(const SteeringProblem& p, const Tolerances& tol) {
  const Matrix& Dl = p.D.back();
  const double margin = pd_margin(p.SigmaN - Dl * Dl.transpose());
  if (margin < tol.pd) {
    std::ostringstream os;
    os << "SigmaN - D_{N-1} D_{N-1}^T is not positive definite (margin " << margin << ")";
    throw SteeringError(ErrorKind::InfeasibleTarget, os.str(), p.N - 1);
  }
}

Matrix block_matrix(const Matrix& S, const Matrix& U, const Matrix& Y) {
  const Eigen::Index n = S.rows(), p = Y.rows();
  Matrix Z(n + p, n + p);
  Z << S, U.transpose(), U, Y;
  return symmetrize(Z);
}

double lambda_max(const Matrix& m) { return spectrum(m).max; }
double lambda_min(const Matrix& m) { return spectrum(m).min; }

// Upper triangle of each G_k, row by row; the equality row order of build_sdp.
Vector stack_upper(const std::vector<Matrix>& G) {
  std::vector<double> out;
  for (const auto& g : G)
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index j = i; j < g.cols(); ++j) out.push_back(g(i, j));
  return Eigen::Map<Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

void unpack(const SdpProgram& prog, const SteeringProblem& p, const Vector& x,
            std::vector<Matrix>& Sigma, std::vector<Matrix>& U, std::vector<Matrix>& Y) {
  const Eigen::Index n = prog.n, m = prog.p;
  Sigma.assign(prog.N + 1, Matrix::Zero(n, n));
  Sigma.front() = p.Sigma0;
  Sigma.back() = p.SigmaN;
  U.assign(prog.N, Matrix::Zero(m, n));
  Y.assign(prog.N, Matrix::Zero(m, m));
  for (int t = 0; t < prog.num_variables(); ++t) {
    const SdpVariable& v = prog.variables[t];
    if (v.kind == 'U') {
      U[v.k](v.row, v.col) = x(t);
      continue;
    }
    Matrix& target = v.kind == 'S' ? Sigma[v.k] : Y[v.k];
    target(v.row, v.col) = x(t);
    target(v.col, v.row) = x(t);
  }
}

detail::CoreData<quad> core_data(const SteeringProblem& p) {
  detail::CoreData<quad> d;
  d.N = p.N;
  d.n = p.n();
  d.p = p.p();
  const Eigen::Index n = d.n, m = d.p;
  for (int k = 0; k < p.N; ++k) {
    Matrix V(n, n + m);
    V << p.A[k], p.B[k];
    Matrix C = Matrix::Zero(n + m, n + m);
    C.topLeftCorner(n, n) = p.Q[k];
    C.bottomRightCorner(m, m) = p.R[k];
    d.V.push_back(V.cast<quad>());
    d.C.push_back(C.cast<quad>());
    d.DD.push_back((p.D[k] * p.D[k].transpose()).cast<quad>());
  }
  d.Sigma0 = p.Sigma0.cast<quad>();
  d.SigmaN = p.SigmaN.cast<quad>();
  return d;
}

Matrix to_double(const QMat& m) { return m.unaryExpr([](const quad& x) { return static_cast<double>(x); }); }

// Strictly feasible point from the Newton solution of the noise-inflated system
// D̄_kD̄_kᵀ = D_kD_kᵀ + εB_kB_kᵀ.
bool inflated_start(const SteeringProblem& p, const SdpOptions& opt, std::vector<QMat>& Z) {
  const Matrix& Dl = p.D.back();
  const Matrix& Bl = p.B.back();
  const double room = lambda_min(p.SigmaN - Dl * Dl.transpose());
  const double gain = lambda_max(Bl * Bl.transpose());
  if (!(room > 0) || !(gain > 0)) return false;
  const double eps = opt.epsilon * room / gain;

  SteeringProblem q = p;
  for (int k = 0; k < p.N; ++k) {
    Matrix D(p.n(), p.q() + p.p());
    D << p.D[k], std::sqrt(eps) * p.B[k];
    q.D[k] = D;
  }
  try {
    const TransitionCache cache(q);
    NewtonOptions nopt;
    nopt.tol = opt.tol;
    const NewtonReport rep = solve_newton(cache, nopt);
    const RiccatiSolution ric = pi_from_pi0(cache, rep.Pi0_star, opt.tol);
    const std::vector<Matrix> K = feedback_gains(q, ric);
    Matrix S = p.Sigma0;
    Z.clear();
    for (int k = 0; k < p.N; ++k) {
      const Matrix U = K[k] * S;
      const Matrix Y =
          U * S.llt().solve(U.transpose()) + eps * Matrix::Identity(p.p(), p.p());
      QMat z = block_matrix(S, U, Y).cast<quad>();
      if (Eigen::LLT<QMat>(z).info() != Eigen::Success) return false;
      Z.push_back(std::move(z));
      const Matrix Ab = p.A[k] + p.B[k] * K[k];
      S = symmetrize(Ab * S * Ab.transpose() + q.D[k] * q.D[k].transpose());
    }
  } catch (const SteeringError&) {
    return false;
  }
  return true;
}

// Infeasible big-M point: Z_k = ξI apart from the pinned Σ₀.
std::vector<QMat> big_m_start(const SteeringProblem& p) {
  const double big = 10.0 * (1.0 + std::max(p.Sigma0.norm(), p.SigmaN.norm()));
  std::vector<QMat> Z;
  for (int k = 0; k < p.N; ++k) {
    const Matrix S = k == 0 ? p.Sigma0 : Matrix(big * Matrix::Identity(p.n(), p.n()));
    const Matrix U = Matrix::Zero(p.p(), p.n());
    const Matrix Y = big * Matrix::Identity(p.p(), p.p());
    Z.push_back(block_matrix(S, U, Y).cast<quad>());
  }
  return Z;
}

SdpSolution collect(const SteeringProblem& p, const detail::Core<quad>& core,
                    const detail::CoreState<quad>& s, const detail::CoreStats& st) {
  const Eigen::Index n = p.n(), m = p.p();
  SdpSolution sol;
  sol.Sigma_seq.push_back(p.Sigma0);
  for (int k = 0; k < p.N; ++k) {
    const Matrix Z = to_double(s.Z[k]);
    if (k > 0) sol.Sigma_seq.push_back(symmetrize(Z.topLeftCorner(n, n)));
    sol.U_seq.push_back(Z.bottomLeftCorner(m, n));
    sol.Y_seq.push_back(symmetrize(Z.bottomRightCorner(m, m)));
    sol.M_seq.push_back(symmetrize(to_double(s.S[k]).bottomRightCorner(m, m)));
    sol.Lambda_seq.push_back(symmetrize(to_double(s.Lam[k + 1])));
  }
  sol.Sigma_seq.push_back(p.SigmaN);
  sol.sigma0_multiplier = symmetrize(to_double(s.Lam[0]));
  sol.objective = sdp_objective(p, sol.Sigma_seq, sol.Y_seq);
  for (int k = 0; k < p.N; ++k) {
    const Matrix& S = sol.Sigma_seq[k];
    const Matrix& U = sol.U_seq[k];
    sol.lossless_gaps.push_back(
        lambda_max(U * S.llt().solve(U.transpose()) - sol.Y_seq[k]));
  }
  sol.barrier_mu_final = st.mu;
  sol.converged = st.converged;
  sol.newton_steps = st.newton_steps;
  sol.centerings = st.centerings;
  sol.primal_infeasibility = static_cast<double>(core.primal_infeasibility(s.Z));
  sol.dual_infeasibility = static_cast<double>(core.dual_infeasibility(s));
  sol.kkt = kkt_residuals(p, sol);
  return sol;
}

}  // namespace

double KktReport::max_residual() const {
  return std::max({sigma_stationarity, sigma0_stationarity, gain_stationarity,
                   input_stationarity, equality, complementarity,
                   std::max(0.0, max_lossless_gap), std::max(0.0, -multiplier_margin)});
}

SdpProgram build_sdp(const SteeringProblem& p) {
  SdpProgram prog;
  prog.N = p.N;
  prog.n = p.n();
  prog.p = p.p();
  const Eigen::Index n = prog.n, m = prog.p;
  for (int k = 1; k < p.N; ++k)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i; j < n; ++j)
        prog.variables.push_back({'S', k, static_cast<int>(i), static_cast<int>(j)});
  for (int k = 0; k < p.N; ++k)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < m; ++i)
        prog.variables.push_back({'U', k, static_cast<int>(i), static_cast<int>(j)});
  for (int k = 0; k < p.N; ++k)
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = i; j < m; ++j)
        prog.variables.push_back({'Y', k, static_cast<int>(i), static_cast<int>(j)});
  prog.block_sizes.assign(p.N, static_cast<int>(n + m));

  const int nv = prog.num_variables();
  std::vector<Matrix> S, U, Y;
  unpack(prog, p, Vector::Zero(nv), S, U, Y);
  const Vector g0 = stack_upper(sdp_equality_residuals(p, S, U, Y));
  prog.equality_rhs = -g0;
  prog.equality_matrix.resize(g0.size(), nv);
  prog.objective.resize(nv);
  for (int t = 0; t < nv; ++t) {
    Vector e = Vector::Zero(nv);
    e(t) = 1.0;
    unpack(prog, p, e, S, U, Y);
    prog.equality_matrix.col(t) = stack_upper(sdp_equality_residuals(p, S, U, Y)) - g0;
    const SdpVariable& v = prog.variables[t];
    if (v.kind == 'U') {
      prog.objective(t) = 0.0;
    } else {
      const Matrix& W = v.kind == 'S' ? p.Q[v.k] : p.R[v.k];
      prog.objective(t) = v.row == v.col ? W(v.row, v.row) : 2.0 * W(v.row, v.col);
    }
  }
  prog.objective_constant = (p.Q[0] * p.Sigma0).trace();
  return prog;
}

std::vector<Matrix> sdp_equality_residuals(const SteeringProblem& p,
                                           const std::vector<Matrix>& Sigma,
                                           const std::vector<Matrix>& U,
                                           const std::vector<Matrix>& Y) {
  if (static_cast<int>(Sigma.size()) != p.N + 1 || static_cast<int>(U.size()) != p.N ||
      static_cast<int>(Y.size()) != p.N)
    throw SteeringError(ErrorKind::DimensionMismatch, "SDP point has the wrong sequence lengths");
  std::vector<Matrix> G;
  G.reserve(p.N);
  for (int k = 0; k < p.N; ++k) {
    const Matrix& A = p.A[k];
    const Matrix& B = p.B[k];
    const Matrix BUA = B * U[k] * A.transpose();
    G.push_back(A * Sigma[k] * A.transpose() + BUA + BUA.transpose() +
                B * Y[k] * B.transpose() + p.D[k] * p.D[k].transpose() - Sigma[k + 1]);
  }
  return G;
}

double sdp_objective(const SteeringProblem& p, const std::vector<Matrix>& Sigma,
                     const std::vector<Matrix>& Y) {
  double J = 0.0;
  for (int k = 0; k < p.N; ++k) J += (p.Q[k] * Sigma[k]).trace() + (p.R[k] * Y[k]).trace();
  return J;
}

SdpSolution solve_sdp(const SteeringProblem& p, const SdpOptions& opt) {
  check_target(p, opt.tol);
  const detail::CoreData<quad> data = core_data(p);
  const detail::Core<quad> core(data);

  detail::CoreState<quad> s;
  bool fallback = opt.force_fallback;
  if (!fallback) fallback = !inflated_start(p, opt, s.Z);
  if (fallback) s.Z = big_m_start(p);
  const quad mu0(opt.barrier_mu0);
  double cnorm = 0.0;
  for (const auto& c : data.C) cnorm = std::max(cnorm, static_cast<double>(c.norm()));
  for (const auto& z : s.Z) {
    const QMat I = QMat::Identity(z.rows(), z.cols());
    s.S.push_back(fallback ? QMat(quad(1.0 + cnorm) * I) : core.sym(mu0 * z.llt().solve(I)));
  }
  s.Lam.assign(p.N + 1, QMat::Zero(p.n(), p.n()));
  if (!fallback) core.project_primal(s.Z);

  detail::CoreSettings cfg;
  cfg.mu0 = opt.barrier_mu0;
  cfg.reduction = opt.mu_reduction;
  cfg.tol_gap = opt.tol_gap;
  cfg.max_newton = opt.max_newton;
  const detail::CoreStats st = core.run(s, cfg);

  SdpSolution sol = collect(p, core, s, st);
  sol.used_fallback = fallback;
  if (!st.converged) throw SdpNotConverged(st.failure, std::move(sol));

  for (int k = 0; k < p.N; ++k) {
    if (sol.lossless_gaps[k] > 1e-6 * (1.0 + sol.Y_seq[k].norm())) {
      std::ostringstream os;
      os << "relaxation gap " << sol.lossless_gaps[k] << " at k = " << k
         << " exceeds the losslessness tolerance";
      sol.converged = false;
      throw SdpNotConverged(os.str(), std::move(sol));
    }
  }

  const MeanTrajectory closed = mean_trajectory(TransitionCache(p));
  const MeanTrajectory qp = solve_mean_qp(p);
  for (int k = 0; k <= p.N; ++k)
    sol.mean_qp_gap = std::max(sol.mean_qp_gap, (closed.mu_seq[k] - qp.mu_seq[k]).norm() /
                                                    (1.0 + closed.mu_seq[k].norm()));
  for (int k = 0; k < p.N; ++k)
    sol.mean_qp_gap = std::max(sol.mean_qp_gap, (closed.v_seq[k] - qp.v_seq[k]).norm() /
                                                    (1.0 + closed.v_seq[k].norm()));
  return sol;
}

KktReport kkt_residuals(const SteeringProblem& p, const SdpSolution& sol) {
  KktReport r;
  r.multiplier_margin = INFINITY;
  r.max_lossless_gap = -INFINITY;
  for (int k = 0; k < p.N; ++k) {
    const Matrix& A = p.A[k];
    const Matrix& B = p.B[k];
    const Matrix& S = sol.Sigma_seq[k];
    const Matrix& U = sol.U_seq[k];
    const Matrix& L = sol.Lambda_seq[k];
    const Matrix K = S.llt().solve(U.transpose()).transpose();  // UΣ⁻¹
    const Matrix M = symmetrize(p.R[k] + B.transpose() * L * B);
    const Matrix& prev = k == 0 ? sol.sigma0_multiplier : sol.Lambda_seq[k - 1];
    const double a =
        (p.Q[k] - K.transpose() * M * K + A.transpose() * L * A - prev).norm();
    if (k == 0)
      r.sigma0_stationarity = a;
    else
      r.sigma_stationarity = std::max(r.sigma_stationarity, a);
    r.gain_stationarity = std::max(r.gain_stationarity, (M * K + B.transpose() * L * A).norm());
    if (static_cast<int>(sol.M_seq.size()) == p.N)
      r.input_stationarity = std::max(
          r.input_stationarity, (p.R[k] - sol.M_seq[k] + B.transpose() * L * B).norm());
    const Matrix C = symmetrize(U * S.llt().solve(U.transpose()) - sol.Y_seq[k]);
    r.multiplier_margin = std::min(r.multiplier_margin, lambda_min(M));
    r.complementarity = std::max(r.complementarity, std::abs((M.transpose() * C).trace()));
    r.max_lossless_gap = std::max(r.max_lossless_gap, lambda_max(C));
  }
  for (const auto& g : sdp_equality_residuals(p, sol.Sigma_seq, sol.U_seq, sol.Y_seq))
    r.equality = std::max(r.equality, g.norm());
  return r;
}

Controller extract_controller(const SteeringProblem& p, const SdpSolution& sol,
                              const Tolerances& tol) {
  Controller c;
  for (int k = 0; k < p.N; ++k) {
    const Matrix& S = sol.Sigma_seq[k];
    if (pd_margin(S) < tol.pd)
      throw SteeringError(ErrorKind::SingularCovariance,
                          "Sigma_k is not positive definite at k = " + std::to_string(k), k);
    c.K_seq.push_back(S.llt().solve(sol.U_seq[k].transpose()).transpose());
  }
  c.Sigma_seq.push_back(p.Sigma0);
  for (int k = 0; k < p.N; ++k) {
    const Matrix Ab = p.A[k] + p.B[k] * c.K_seq[k];
    c.Sigma_seq.push_back(
        symmetrize(Ab * c.Sigma_seq.back() * Ab.transpose() + p.D[k] * p.D[k].transpose()));
  }
  const MeanTrajectory mean = mean_trajectory(TransitionCache(p));
  c.mu_seq = mean.mu_seq;
  c.v_seq = mean.v_seq;
  return c;
}

MeanTrajectory solve_mean_qp(const SteeringProblem& p) {
  const int N = p.N;
  const Eigen::Index n = p.n(), m = p.p();
  const Eigen::Index nmu = (N - 1) * n;  // μ_1 … μ_{N−1}
  const Eigen::Index nz = nmu + N * m;   // then v_0 … v_{N−1}
  const Eigen::Index nc = N * n;
  auto mu_col = [&](int k) { return (k - 1) * n; };
  auto v_col = [&](int k) { return nmu + k * m; };

  Matrix K = Matrix::Zero(nz + nc, nz + nc);
  Vector rhs = Vector::Zero(nz + nc);
  for (int k = 1; k < N; ++k) K.block(mu_col(k), mu_col(k), n, n) = 2.0 * p.Q[k];
  for (int k = 0; k < N; ++k) K.block(v_col(k), v_col(k), m, m) = 2.0 * p.R[k];
  // μ_{k+1} − A_kμ_k − B_kv_k = 0, boundary means moved to the right.
  for (int k = 0; k < N; ++k) {
    const Eigen::Index row = nz + k * n;
    Vector b = Vector::Zero(n);
    if (k + 1 < N)
      K.block(row, mu_col(k + 1), n, n) = Matrix::Identity(n, n);
    else
      b += p.muN;
    if (k > 0)
      K.block(row, mu_col(k), n, n) = -p.A[k];
    else
      b -= p.A[0] * p.mu0;
    K.block(row, v_col(k), n, m) = -p.B[k];
    rhs.segment(row, n) = -b;
  }
  K.topRightCorner(nz, nc) = K.bottomLeftCorner(nc, nz).transpose();
  const Vector z = K.partialPivLu().solve(rhs);

  MeanTrajectory out;
  out.mu_seq.push_back(p.mu0);
  for (int k = 1; k < N; ++k) out.mu_seq.push_back(z.segment(mu_col(k), n));
  out.mu_seq.push_back(p.muN);
  for (int k = 0; k < N; ++k) out.v_seq.push_back(z.segment(v_col(k), m));
  return out;
}

void write_sdpa(const SteeringProblem& p, std::ostream& out) {
  const int N = p.N;
  const Eigen::Index n = p.n(), m = p.p(), nb = n + m;
  const Matrix Ptop = Matrix::Identity(nb, n);  // [I; 0]

  struct Entry {
    int block;
    Eigen::Index i, j;
    double value;
  };
  std::vector<std::vector<Entry>> F;
  std::vector<double> c;
  auto add_block = [&](std::vector<Entry>& es, int block, const Matrix& W) {
    for (Eigen::Index i = 0; i < nb; ++i)
      for (Eigen::Index j = i; j < nb; ++j)
        if (W(i, j) != 0.0) es.push_back({block, i, j, W(i, j)});
  };

  // Row r = 0 is the Σ₀ pin, row r = k+1 is G_k; one SDPA constraint per upper entry.
  for (int r = 0; r <= N; ++r) {
    Matrix constant = r == 0 ? p.Sigma0 : Matrix(p.D[r - 1] * p.D[r - 1].transpose());
    if (r == N) constant -= p.SigmaN;
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = a; b < n; ++b) {
        Matrix E = Matrix::Zero(n, n);
        E(a, b) += 0.5;
        E(b, a) += 0.5;
        std::vector<Entry> es;
        if (r >= 1) {
          Matrix V(n, nb);
          V << p.A[r - 1], p.B[r - 1];
          add_block(es, r - 1, symmetrize(V.transpose() * E * V));
        }
        if (r < N) add_block(es, r, -Ptop * E * Ptop.transpose());
        F.push_back(std::move(es));
        c.push_back(-constant(a, b));
      }
  }

  out << "\"covariance steering relaxation: max -<C,Z> s.t. <F_i,Z> = c_i, Z = blkdiag(Z_0..Z_{N-1})\n";
  out << F.size() << "\n" << N << "\n";
  for (int k = 0; k < N; ++k) out << nb << (k + 1 < N ? " " : "\n");
  out << std::setprecision(17);
  for (std::size_t i = 0; i < c.size(); ++i) out << c[i] << (i + 1 < c.size() ? " " : "\n");
  for (int k = 0; k < N; ++k) {
    Matrix C = Matrix::Zero(nb, nb);
    C.topLeftCorner(n, n) = p.Q[k];
    C.bottomRightCorner(m, m) = p.R[k];
    for (Eigen::Index i = 0; i < nb; ++i)
      for (Eigen::Index j = i; j < nb; ++j)
        if (C(i, j) != 0.0) out << 0 << " " << k + 1 << " " << i + 1 << " " << j + 1 << " " << -C(i, j) << "\n";
  }
  for (std::size_t f = 0; f < F.size(); ++f)
    for (const Entry& e : F[f])
      out << f + 1 << " " << e.block + 1 << " " << e.i + 1 << " " << e.j + 1 << " " << e.value
          << "\n";
}

}  // namespace covsteer
