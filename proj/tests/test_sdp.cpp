#include "doctest.h"
#include "fixtures.hpp"

#include <sstream>

#include "covsteer/newton.hpp"
#include "covsteer/sdp.hpp"

using namespace covsteer;
using namespace fixtures;

namespace {

double max_gain_gap(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, (a[k] - b[k]).norm());
  return d;
}

Controller newton_controller(const SteeringProblem& p) {
  const TransitionCache cache(p);
  const NewtonReport r = solve_newton(cache);
  return assemble_controller(cache, pi_from_pi0(cache, r.Pi0_star));
}

// J_Σ of an affine controller: Σ tr(QΣ) + tr(RKΣKᵀ) along its own covariances.
double covariance_cost(const SteeringProblem& p, const Controller& c) {
  double J = 0.0;
  for (int k = 0; k < p.N; ++k) {
    const Matrix& S = c.Sigma_seq[k];
    J += (p.Q[k] * S).trace() + (p.R[k] * c.K_seq[k] * S * c.K_seq[k].transpose()).trace();
  }
  return J;
}

const SdpSolution& worked_example_solution() {
  static const SdpSolution sol = solve_sdp(double_integrator());
  return sol;
}

}  // namespace

TEST_CASE("scalar program has two variables and one equality") {
  const SdpProgram prog = build_sdp(s1());
  CHECK(prog.num_variables() == 2);
  CHECK(prog.num_sigma_blocks() == 0);
  CHECK(prog.num_equalities() == 1);
  REQUIRE(prog.block_sizes.size() == 1);
  CHECK(prog.block_sizes[0] == 2);
  CHECK(prog.variables[0].kind == 'U');
  CHECK(prog.variables[1].kind == 'Y');
  // 2U₀ + Y₀ + 1 + 1 − 2 = 0.
  CHECK(prog.equality_matrix(0, 0) == doctest::Approx(2.0));
  CHECK(prog.equality_matrix(0, 1) == doctest::Approx(1.0));
  CHECK(prog.equality_rhs(0) == doctest::Approx(0.0));
  CHECK(prog.objective(0) == 0.0);
  CHECK(prog.objective(1) == doctest::Approx(1.0));
}

TEST_CASE("double integrator dimension count") {
  const SdpProgram prog = build_sdp(double_integrator());
  int S = 0, U = 0, Y = 0;
  for (const auto& v : prog.variables) (v.kind == 'S' ? S : v.kind == 'U' ? U : Y)++;
  CHECK(prog.num_sigma_blocks() == 29);
  CHECK(S == 29 * 3);
  CHECK(U == 30 * 2);
  CHECK(Y == 30 * 1);
  CHECK(prog.num_equalities() == 30 * 3);
  CHECK(prog.block_sizes == std::vector<int>(30, 3));
}

TEST_CASE("single step problems have no free covariance") {
  Random rng(31);
  for (int t = 0; t < 10; ++t) {
    RandomShape shape;
    shape.max_N = 1;
    const SdpProgram prog = build_sdp(random_problem(rng, shape));
    CHECK(prog.num_sigma_blocks() == 0);
    for (const auto& v : prog.variables) CHECK(v.kind != 'S');
  }
}

TEST_CASE("program matrices reproduce the covariance equalities and objective") {
  Random rng(32);
  for (int t = 0; t < 20; ++t) {
    const SteeringProblem p = random_problem(rng);
    const SdpProgram prog = build_sdp(p);
    const Vector x = Vector::NullaryExpr(prog.num_variables(), [&] { return rng.uniform(-1, 1); });
    std::vector<Matrix> S(p.N + 1), U(p.N), Y(p.N);
    S.front() = p.Sigma0;
    S.back() = p.SigmaN;
    for (int k = 1; k < p.N; ++k) S[k] = Matrix::Zero(p.n(), p.n());
    for (int k = 0; k < p.N; ++k) {
      U[k] = Matrix::Zero(p.p(), p.n());
      Y[k] = Matrix::Zero(p.p(), p.p());
    }
    for (int i = 0; i < prog.num_variables(); ++i) {
      const SdpVariable& v = prog.variables[i];
      if (v.kind == 'U') {
        U[v.k](v.row, v.col) = x(i);
      } else {
        Matrix& M = v.kind == 'S' ? S[v.k] : Y[v.k];
        M(v.row, v.col) = M(v.col, v.row) = x(i);
      }
    }
    const std::vector<Matrix> G = sdp_equality_residuals(p, S, U, Y);
    const Vector lhs = prog.equality_matrix * x - prog.equality_rhs;
    int row = 0;
    for (int k = 0; k < p.N; ++k)
      for (Eigen::Index i = 0; i < p.n(); ++i)
        for (Eigen::Index j = i; j < p.n(); ++j) CHECK(lhs(row++) == doctest::Approx(G[k](i, j)));
    CHECK(prog.objective.dot(x) + prog.objective_constant ==
          doctest::Approx(sdp_objective(p, S, Y)));
  }
}

TEST_CASE("scalar optimum is the zero gain") {
  const SteeringProblem p = s1();
  const SdpSolution sol = solve_sdp(p);
  REQUIRE(sol.converged);
  CHECK(std::abs(sol.U_seq[0](0, 0)) <= 1e-8);
  CHECK(std::abs(sol.Y_seq[0](0, 0)) <= 1e-8);
  CHECK(std::abs(sol.objective) <= 1e-8);
  CHECK(sol.M_seq[0](0, 0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(std::abs(sol.Lambda_seq[0](0, 0)) <= 1e-8);
  CHECK(sol.kkt.max_residual() <= 1e-8);

  const Controller c = extract_controller(p, sol);
  const Controller n = newton_controller(p);
  CHECK(std::abs(c.K_seq[0](0, 0)) <= 1e-8);
  CHECK(max_gain_gap(c.K_seq, n.K_seq) <= 1e-8);
}

TEST_CASE("double integrator converges within budget") {
  const SdpSolution& sol = worked_example_solution();
  REQUIRE(sol.converged);
  CHECK_FALSE(sol.used_fallback);
  const SdpOptions defaults;
  CHECK(sol.barrier_mu_final * 30 * 3 <= defaults.tol_gap);
  CHECK(sol.kkt.equality <= 1e-7);
  for (int k = 0; k < 30; ++k) {
    CHECK(sol.lossless_gaps[k] <= 1e-6 * (1.0 + sol.Y_seq[k].norm()));
    const Matrix Z = (Matrix(3, 3) << sol.Sigma_seq[k], sol.U_seq[k].transpose(), sol.U_seq[k],
                      sol.Y_seq[k])
                         .finished();
    CHECK(pd_margin(Z) >= -1e-10);
  }
  CHECK(sol.Sigma_seq.front() == double_integrator().Sigma0);
  CHECK(sol.Sigma_seq.back() == double_integrator().SigmaN);
}

TEST_CASE("double integrator objective matches the Newton covariance cost") {
  const SteeringProblem p = double_integrator();
  const SdpSolution& sol = worked_example_solution();
  const Controller n = newton_controller(p);
  const double J = covariance_cost(p, n);
  CHECK(std::abs(sol.objective - J) <= 1e-8 * J);
  // Frozen from the Newton path: 298.679489718607.
  CHECK(sol.objective == doctest::Approx(298.679489718607).epsilon(1e-9));
}

TEST_CASE("double integrator gains and cost agree with the Newton path") {
  const SteeringProblem p = double_integrator();
  const SdpSolution& sol = worked_example_solution();
  const Controller c = extract_controller(p, sol);
  const Controller n = newton_controller(p);
  for (int k = 0; k < p.N; ++k) CHECK((c.K_seq[k] - n.K_seq[k]).norm() <= 1e-4);
  CHECK(max_gain_gap(c.K_seq, n.K_seq) <= 1e-8);
  const double ja = analytic_cost(p, c);
  const double jb = analytic_cost(p, n);
  CHECK(std::abs(ja - jb) <= 1e-6 * std::abs(jb));
  CHECK((c.Sigma_seq.back() - p.SigmaN).norm() <= 1e-6);
  CHECK(std::abs(sol.objective - covariance_cost(p, c)) <= 1e-8 * (1.0 + sol.objective));
}

TEST_CASE("double integrator first-order conditions") {
  const SdpSolution& sol = worked_example_solution();
  const KktReport& r = sol.kkt;
  CHECK(r.sigma_stationarity <= 1e-6);
  CHECK(r.sigma0_stationarity <= 1e-6);
  CHECK(r.gain_stationarity <= 1e-6);
  CHECK(r.input_stationarity <= 1e-6);
  CHECK(r.equality <= 1e-6);
  CHECK(r.multiplier_margin > 0.0);
  CHECK(r.complementarity <= 1e-8);
  CHECK(r.max_lossless_gap <= 1e-6);
  CHECK(r.max_residual() <= 1e-6);
  // Recomputing from the public fields gives the stored report.
  const KktReport again = kkt_residuals(double_integrator(), sol);
  CHECK(again.sigma_stationarity == doctest::Approx(r.sigma_stationarity));
  CHECK(again.complementarity == doctest::Approx(r.complementarity));
}

TEST_CASE("big-M start reaches the same optimum") {
  const SteeringProblem p = double_integrator();
  SdpOptions opt;
  opt.force_fallback = true;
  const SdpSolution sol = solve_sdp(p, opt);
  REQUIRE(sol.converged);
  CHECK(sol.used_fallback);
  const SdpSolution& ref = worked_example_solution();
  CHECK(std::abs(sol.objective - ref.objective) <= 1e-8 * ref.objective);
  CHECK(max_gain_gap(extract_controller(p, sol).K_seq, extract_controller(p, ref).K_seq) <= 1e-6);
}

TEST_CASE("random planted instances agree across methods from both starts") {
  Random rng(33);
  for (int t = 0; t < 12; ++t) {
    const Planted pl = planted_problem(rng);
    const SteeringProblem& p = pl.problem;
    const TransitionCache cache(p);
    const Controller n = assemble_controller(cache, pi_from_pi0(cache, pl.Pi0_star));
    for (bool fallback : {false, true}) {
      SdpOptions opt;
      opt.force_fallback = fallback;
      const SdpSolution sol = solve_sdp(p, opt);
      REQUIRE(sol.converged);
      const Controller c = extract_controller(p, sol);
      CHECK(max_gain_gap(c.K_seq, n.K_seq) <= 1e-4);
      const double jn = analytic_cost(p, n);
      CHECK(std::abs(analytic_cost(p, c) - jn) <= 1e-6 * (1.0 + std::abs(jn)));
      for (int k = 0; k < p.N; ++k)
        CHECK(sol.lossless_gaps[k] <= 1e-6 * (1.0 + sol.Y_seq[k].norm()));
      CHECK(sol.kkt.max_residual() <= 1e-6);
      CHECK(std::abs(sol.objective - covariance_cost(p, c)) <= 1e-8 * (1.0 + sol.objective));
      CHECK(sol.mean_qp_gap <= 1e-8);
    }
  }
}

TEST_CASE("the Sigma0 pin multiplier closes the k = 0 stationarity row") {
  const SdpSolution& sol = worked_example_solution();
  CHECK(sol.sigma0_multiplier.rows() == 2);
  CHECK(sol.kkt.sigma0_stationarity <= 1e-8);
}

TEST_CASE("relaxation soundness on perturbed feasible points") {
  Random rng(34);
  for (int t = 0; t < 25; ++t) {
    const SteeringProblem p = random_problem(rng);
    std::vector<Matrix> S(p.N + 1), U(p.N), Y(p.N), Yt(p.N);
    for (int k = 0; k <= p.N; ++k) S[k] = rng.spd(p.n(), 0.2, 0.8);
    S.front() = p.Sigma0;
    S.back() = p.SigmaN;
    double drop = 0.0;
    for (int k = 0; k < p.N; ++k) {
      U[k] = rng.gaussian(p.p(), p.n());
      Yt[k] = U[k] * S[k].llt().solve(U[k].transpose());
      const Matrix slack = rng.spd(p.p(), 0.01, 0.5);  // C_k = −slack ≺ 0
      Y[k] = Yt[k] + slack;
      drop += (p.R[k] * slack).trace();
    }
    // Substituting Y = UΣ⁻¹Uᵀ lowers the objective by Σ tr(R·slack) ≥ 0.
    const double before = sdp_objective(p, S, Y);
    const double after = sdp_objective(p, S, Yt);
    CHECK(after <= before);
    CHECK(before - after == doctest::Approx(drop));
    // With that substitution G_k is the closed-loop covariance recursion residual.
    const std::vector<Matrix> G = sdp_equality_residuals(p, S, U, Yt);
    for (int k = 0; k < p.N; ++k) {
      const Matrix K = S[k].llt().solve(U[k].transpose()).transpose();
      const Matrix Ab = p.A[k] + p.B[k] * K;
      const Matrix expect = Ab * S[k] * Ab.transpose() + p.D[k] * p.D[k].transpose() - S[k + 1];
      CHECK(rel(G[k], expect) <= 1e-12);
    }
  }
}

TEST_CASE("mean program through its KKT system equals the closed forms") {
  Random rng(35);
  auto check = [](const SteeringProblem& p) {
    const MeanTrajectory a = solve_mean_qp(p);
    const MeanTrajectory b = mean_trajectory(TransitionCache(p));
    for (int k = 0; k <= p.N; ++k) CHECK((a.mu_seq[k] - b.mu_seq[k]).norm() <= 1e-8 * (1.0 + b.mu_seq[k].norm()));
    for (int k = 0; k < p.N; ++k) CHECK((a.v_seq[k] - b.v_seq[k]).norm() <= 1e-8 * (1.0 + b.v_seq[k].norm()));
  };
  check(double_integrator());
  check(s1(3));
  for (int t = 0; t < 20; ++t) check(random_problem(rng));
}

TEST_CASE("extraction rejects a singular covariance") {
  SdpSolution sol = worked_example_solution();
  sol.Sigma_seq[4] = Matrix::Zero(2, 2);
  try {
    extract_controller(double_integrator(), sol);
    FAIL("expected SingularCovariance");
  } catch (const SteeringError& e) {
    CHECK(e.kind() == ErrorKind::SingularCovariance);
    CHECK(e.step() == 4);
  }
}

TEST_CASE("unreachable target is reported before solving") {
  SteeringProblem p = double_integrator();
  p.SigmaN = p.D.back() * p.D.back().transpose();
  try {
    solve_sdp(p);
    FAIL("expected InfeasibleTarget");
  } catch (const SteeringError& e) {
    CHECK(e.kind() == ErrorKind::InfeasibleTarget);
  }
}

TEST_CASE("Newton budget exhaustion surfaces the last iterate") {
  SdpOptions opt;
  opt.max_newton = 1;
  opt.force_fallback = true;
  try {
    solve_sdp(double_integrator(), opt);
    FAIL("expected NotConverged");
  } catch (const SdpNotConverged& e) {
    CHECK(e.kind() == ErrorKind::NotConverged);
    CHECK_FALSE(e.last_iterate().converged);
    CHECK(e.last_iterate().Sigma_seq.size() == 31);
    CHECK(e.last_iterate().newton_steps >= 1);
  }
}

TEST_CASE("SDPA export evaluates to the program at the optimum") {
  const SteeringProblem p = double_integrator();
  std::ostringstream os;
  write_sdpa(p, os);
  std::istringstream in(os.str());
  std::string comment;
  std::getline(in, comment);
  CHECK(comment.front() == '"');
  int m = 0, nblocks = 0;
  in >> m >> nblocks;
  CHECK(m == 31 * 3);
  CHECK(nblocks == 30);
  std::vector<int> sizes(nblocks);
  for (int& s : sizes) in >> s;
  CHECK(sizes == std::vector<int>(30, 3));
  Vector c(m);
  for (int i = 0; i < m; ++i) in >> c(i);

  const SdpSolution& sol = worked_example_solution();
  std::vector<Matrix> Z(nblocks);
  for (int k = 0; k < nblocks; ++k)
    Z[k] = (Matrix(3, 3) << sol.Sigma_seq[k], sol.U_seq[k].transpose(), sol.U_seq[k],
            sol.Y_seq[k])
               .finished();
  Vector lhs = Vector::Zero(m + 1);  // entry 0 is F0
  int mat, blk, i, j;
  double v;
  while (in >> mat >> blk >> i >> j >> v) {
    const double w = i == j ? 1.0 : 2.0;  // upper entries stand for both halves
    lhs(mat) += w * v * Z[blk - 1](i - 1, j - 1);
  }
  CHECK(lhs(0) == doctest::Approx(-sol.objective).epsilon(1e-10));
  for (int r = 0; r < m; ++r) CHECK(lhs(r + 1) == doctest::Approx(c(r)).epsilon(1e-8));
}

TEST_CASE("default options") {
  const SdpOptions o;
  CHECK(o.barrier_mu0 == 1.0);
  CHECK(o.mu_reduction == 10.0);
  CHECK(o.tol_gap == 1e-9);
  CHECK(o.max_newton == 50);
  CHECK_FALSE(o.force_fallback);
}
