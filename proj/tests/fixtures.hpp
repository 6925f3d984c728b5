#pragma once

#include <algorithm>
#include <random>

#include "covsteer/problem.hpp"
#include "covsteer/symplectic.hpp"

namespace fixtures {

using covsteer::Matrix;
using covsteer::SteeringProblem;
using covsteer::Vector;

inline Matrix m1(double v) { return Matrix::Constant(1, 1, v); }
inline Vector v1(double v) { return Vector::Constant(1, v); }

// Scalar instance: A=B=D=1, Q=0, R=1, Σ̄₀=1, Σ̄_N=2, μ̄₀=1, μ̄_N=0.
inline SteeringProblem s1(int N = 1) {
  return SteeringProblem::time_invariant(N, m1(1), m1(1), m1(1), m1(0), m1(1), v1(1), v1(0),
                                         m1(1), m1(2));
}

// Double integrator, 30 steps, position/velocity boundary data.
inline SteeringProblem double_integrator() {
  Matrix A(2, 2), B(2, 1), D(2, 2), S0(2, 2), SN(2, 2);
  A << 1, 0.2, 0, 1;
  B << 0.02, 0.2;
  D << 0.4, 0, 0.4, 0.6;
  S0 << 5, -1, -1, 1;
  SN << 0.5, -0.4, -0.4, 2;
  Vector mu0(2), muN(2);
  mu0 << 30, -5;
  muN << 0, 0;
  return SteeringProblem::time_invariant(30, A, B, D, 0.5 * Matrix::Identity(2, 2),
                                         Matrix::Identity(1, 1), mu0, muN, S0, SN);
}

inline double rel(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / (1.0 + b.norm());
}

class Random {
 public:
  explicit Random(std::uint64_t seed) : gen_(seed) {}

  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }
  Matrix gaussian(Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = nd(gen_);
    return m;
  }
  Vector gaussian_vector(Eigen::Index r, double scale = 1.0) {
    return gaussian(r, 1, scale).col(0);
  }
  Matrix spd(Eigen::Index n, double floor = 0.5, double scale = 0.5) {
    const Matrix L = gaussian(n, n, scale);
    return L * L.transpose() + floor * Matrix::Identity(n, n);
  }
  Matrix symmetric(Eigen::Index n, double scale = 1.0) {
    const Matrix g = gaussian(n, n, scale);
    return 0.5 * (g + g.transpose());
  }
  Matrix orthogonal(Eigen::Index n) {
    Eigen::HouseholderQR<Matrix> qr(gaussian(n, n));
    return qr.householderQ() * Matrix::Identity(n, n);
  }
  // U·diag(s)·Vᵀ with singular values drawn from [lo, hi].
  Matrix bounded_gain(Eigen::Index n, double lo, double hi) {
    Vector s(n);
    for (Eigen::Index i = 0; i < n; ++i) s(i) = uniform(lo, hi);
    return orthogonal(n) * s.asDiagonal() * orthogonal(n).transpose();
  }
  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

struct RandomShape {
  int max_n = 4, max_p = 2, max_q = 3, max_N = 12;
};

// Well-conditioned random valid instance, time-varying.
inline SteeringProblem random_problem(Random& rng, RandomShape shape = {}) {
  for (;;) {
    const int n = rng.integer(1, shape.max_n);
    const int p = rng.integer(1, shape.max_p);
    const int q = rng.integer(1, shape.max_q);
    const int N = rng.integer(1, shape.max_N);
    SteeringProblem pr;
    pr.N = N;
    for (int k = 0; k < N; ++k) {
      pr.A.push_back(rng.bounded_gain(n, 0.85, 1.15));
      pr.B.push_back(rng.gaussian(n, p, 0.6));
      pr.D.push_back(rng.gaussian(n, q, 0.3));
      pr.Q.push_back(rng.integer(0, 3) == 0 ? Matrix::Zero(n, n).eval()
                                            : Matrix(rng.spd(n, 0.0, 0.4)));
      pr.R.push_back(rng.spd(p, 0.5, 0.4));
    }
    pr.mu0 = rng.gaussian_vector(n, 2.0);
    pr.muN = rng.gaussian_vector(n, 2.0);
    pr.Sigma0 = rng.spd(n, 0.3, 0.6);
    const Matrix& Dl = pr.D.back();
    pr.SigmaN = Dl * Dl.transpose() + rng.spd(n, 0.3, 0.6);
    if (!covsteer::validate(pr).ok()) continue;
    bool conditioned = true;
    for (const auto& A : pr.A) conditioned = conditioned && covsteer::singular_ratio(A) > 0.05;
    if (!conditioned) continue;
    const covsteer::TransitionCache cache(pr);
    if (cache.symplectic_defect() > 1e-13) continue;
    double growth = 0.0;
    for (int k = 0; k <= N; ++k) growth = std::max(growth, cache.from_start(k).full().norm());
    if (growth > 300.0) continue;
    if (covsteer::singular_ratio(cache.reach()) < 1e-6) continue;
    return pr;
  }
}

}  // namespace fixtures

namespace fixtures {

// Symmetric Π₀ with Π_b − Π₀ ⪰ gap·(1+‖Π_b‖)·I, a random distance inside the feasible set.
inline Matrix feasible_pi0(Random& rng, const covsteer::TransitionCache& cache, double gap = 0.05) {
  const Matrix Pb = cache.boundary_matrix();
  const Eigen::Index n = cache.n();
  const double scale = 1.0 + Pb.norm();
  const Matrix offset = rng.spd(n, 0.0, 0.5) * scale * rng.uniform(0.05, 1.0);
  return covsteer::symmetrize(Pb - offset - gap * scale * Matrix::Identity(n, n));
}

}  // namespace fixtures

#include "covsteer/covariance_map.hpp"

namespace fixtures {

struct Planted {
  SteeringProblem problem;
  Matrix Pi0_star;  // the root of f(Π₀) = Σ̄_N by construction
};

// Random instance whose terminal covariance is f(Π₀*) for a Π₀* drawn inside the
// feasible set, so the root sits a controlled distance from the boundary.
inline Planted planted_problem(Random& rng, RandomShape shape = {}, double gap = 0.05) {
  for (;;) {
    SteeringProblem p = random_problem(rng, shape);
    const covsteer::TransitionCache cache(p);
    const Matrix star = feasible_pi0(rng, cache, gap);
    p.SigmaN = covsteer::eval_f(cache, star);
    const Matrix& Dl = p.D.back();
    if (covsteer::pd_margin(p.SigmaN - Dl * Dl.transpose()) < 1e-3) continue;
    return {p, star};
  }
}

}  // namespace fixtures

namespace fixtures {

// Central differences along symmetric directions E_ij + E_ji.
inline Matrix fd_jacobian(const covsteer::TransitionCache& cache, const Matrix& Pi0) {
  const Eigen::Index n = Pi0.rows();
  Matrix J = Matrix::Zero(n * n, n * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      Matrix E = Matrix::Zero(n, n);
      E(i, j) = E(j, i) = 1.0;
      const double h = 1e-6 * (1.0 + Pi0.cwiseAbs().maxCoeff());
      const Vector d = covsteer::vec(covsteer::eval_f(cache, Pi0 + h * E) - covsteer::eval_f(cache, Pi0 - h * E)) / (2 * h);
      // A symmetric direction excites both vec columns; split evenly for off-diagonals.
      if (i == j) {
        J.col(j * n + i) = d;
      } else {
        J.col(j * n + i) = 0.5 * d;
        J.col(i * n + j) = 0.5 * d;
      }
    }
  }
  return J;
}

// The analytic Jacobian applied to symmetric directions, in the same split form.
inline Matrix symmetric_part(const Matrix& J, Eigen::Index n) {
  Matrix out = J;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i) {
      const Vector avg = 0.5 * (J.col(j * n + i) + J.col(i * n + j));
      out.col(j * n + i) = avg;
      out.col(i * n + j) = avg;
    }
  return out;
}

}  // namespace fixtures

#include "covsteer/riccati.hpp"

namespace fixtures {

struct Point {
  SteeringProblem problem;
  Matrix Pi0;
};

// Largest condition number of I + B_k R_k⁻¹ B_kᵀ Π_{k+1}; the recursion paths lose
// roughly this factor of accuracy relative to the closed forms.
inline double resolvent_condition(const SteeringProblem& p, const covsteer::RiccatiSolution& r) {
  double worst = 1.0;
  for (int k = 0; k < p.N; ++k) {
    const Matrix BRB = p.B[k] * p.R[k].llt().solve(p.B[k].transpose());
    const Matrix M = Matrix::Identity(p.n(), p.n()) + BRB * r.Pi[k + 1];
    worst = std::max(worst, 1.0 / covsteer::singular_ratio(M));
  }
  return worst;
}

// Random instance and feasible Π₀ with resolvent condition at most max_condition.
inline Point random_point(Random& rng, double max_condition = 1e3, RandomShape shape = {}) {
  for (;;) {
    SteeringProblem p = random_problem(rng, shape);
    const covsteer::TransitionCache cache(p);
    for (int attempt = 0; attempt < 10; ++attempt) {
      const Matrix Pi0 = feasible_pi0(rng, cache);
      const covsteer::RiccatiSolution r = covsteer::pi_from_pi0(cache, Pi0);
      if (resolvent_condition(p, r) <= max_condition) return {std::move(p), Pi0};
    }
  }
}

}  // namespace fixtures
