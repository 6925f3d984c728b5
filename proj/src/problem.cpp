#include "covsteer/problem.hpp"

#include <algorithm>
#include <sstream>

#include "covsteer/errors.hpp"

namespace covsteer {

SteeringProblem SteeringProblem::time_invariant(int N, const Matrix& A, const Matrix& B,
                                                const Matrix& D, const Matrix& Q,
                                                const Matrix& R, const Vector& mu0,
                                                const Vector& muN, const Matrix& Sigma0,
                                                const Matrix& SigmaN) {
  SteeringProblem p;
  p.N = N;
  const auto n = static_cast<std::size_t>(std::max(N, 0));
  p.A.assign(n, A);
  p.B.assign(n, B);
  p.D.assign(n, D);
  p.Q.assign(n, Q);
  p.R.assign(n, R);
  p.mu0 = mu0;
  p.muN = muN;
  p.Sigma0 = Sigma0;
  p.SigmaN = SigmaN;
  return p;
}

bool ValidationReport::has(const std::string& invariant) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.invariant == invariant; });
}

namespace {

std::string shape(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void check_shape(ValidationReport& report, const char* name, int step, const Matrix& m,
                 Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() == rows && m.cols() == cols) return;
  std::ostringstream os;
  os << name << " is " << shape(m) << ", expected " << rows << "x" << cols;
  report.violations.push_back({kDimension, step, 0.0, os.str()});
}

bool dimensions_consistent(const SteeringProblem& p, ValidationReport& report) {
  const std::size_t before = report.violations.size();
  if (p.N < 1) {
    report.violations.push_back({kHorizon, -1, static_cast<double>(p.N), "N must be >= 1"});
    return false;
  }
  const auto N = static_cast<std::size_t>(p.N);
  auto length = [&](const char* name, std::size_t size) {
    if (size == N) return;
    std::ostringstream os;
    os << name << " has " << size << " entries, expected " << N;
    report.violations.push_back({kDimension, -1, 0.0, os.str()});
  };
  length("A", p.A.size());
  length("B", p.B.size());
  length("D", p.D.size());
  length("Q", p.Q.size());
  length("R", p.R.size());
  if (report.violations.size() != before) return false;

  const Eigen::Index n = p.A.front().rows();
  const Eigen::Index m = p.B.front().cols();
  const Eigen::Index q = p.D.front().cols();
  if (n == 0) {
    report.violations.push_back({kDimension, 0, 0.0, "A has zero rows"});
    return false;
  }
  for (int k = 0; k < p.N; ++k) {
    check_shape(report, "A", k, p.A[k], n, n);
    check_shape(report, "B", k, p.B[k], n, m);
    check_shape(report, "D", k, p.D[k], n, q);
    check_shape(report, "Q", k, p.Q[k], n, n);
    check_shape(report, "R", k, p.R[k], m, m);
  }
  check_shape(report, "Sigma0", -1, p.Sigma0, n, n);
  check_shape(report, "SigmaN", -1, p.SigmaN, n, n);
  if (p.mu0.size() != n)
    report.violations.push_back({kDimension, -1, 0.0, "mu0 length does not match n"});
  if (p.muN.size() != n)
    report.violations.push_back({kDimension, -1, 0.0, "muN length does not match n"});
  if (m == 0) report.violations.push_back({kDimension, -1, 0.0, "B has zero columns"});
  return report.violations.size() == before;
}

void check_symmetric(ValidationReport& report, const char* name, int step, const Matrix& m,
                     const Tolerances& tol) {
  const double a = relative_asymmetry(m);
  if (a <= tol.symmetry) return;
  std::ostringstream os;
  os << name << " asymmetric (relative " << a << ")";
  report.violations.push_back({kSymmetry, step, -a, os.str()});
}

void check_index(const SteeringProblem& p, int k) {
  if (k < 0 || k > p.N)
    throw SteeringError(ErrorKind::IndexOutOfRange,
                        "time index " + std::to_string(k) + " outside [0, N]", k);
}

}  // namespace

ValidationReport validate(const SteeringProblem& p, const Tolerances& tol) {
  ValidationReport report;
  if (!dimensions_consistent(p, report)) return report;

  for (int k = 0; k < p.N; ++k) {
    check_symmetric(report, "Q", k, p.Q[k], tol);
    check_symmetric(report, "R", k, p.R[k], tol);
  }
  check_symmetric(report, "Sigma0", -1, p.Sigma0, tol);
  check_symmetric(report, "SigmaN", -1, p.SigmaN, tol);

  bool all_invertible = true;
  for (int k = 0; k < p.N; ++k) {
    const double r = singular_ratio(p.A[k]);
    if (r <= tol.singular) {
      all_invertible = false;
      report.violations.push_back({kInvertibleA, k, r, "A_k is singular to working precision"});
    }
    const double mq = pd_margin(p.Q[k]);
    if (mq < -tol.psd)
      report.violations.push_back({kStateWeightPsd, k, mq, "Q_k is not positive semidefinite"});
    const double mr = pd_margin(p.R[k]);
    if (mr < tol.pd)
      report.violations.push_back({kInputWeightPd, k, mr, "R_k is not positive definite"});
  }

  const double m0 = pd_margin(p.Sigma0);
  if (m0 < tol.pd)
    report.violations.push_back({kInitialCovariancePd, -1, m0, "Sigma0 is not positive definite"});

  const Matrix& Dl = p.D.back();
  const double mN = pd_margin(p.SigmaN - Dl * Dl.transpose());
  if (mN < tol.pd)
    report.violations.push_back({kTerminalCovarianceAboveNoise, p.N - 1, mN,
                                 "SigmaN - D_{N-1} D_{N-1}^T is not positive definite"});

  if (all_invertible) {
    const double mg = pd_margin(gramian(p, p.N, 0));
    if (mg < tol.pd)
      report.violations.push_back({kControllable, -1, mg,
                                   "reachability Gramian G(N,0) is not positive definite"});
  }
  return report;
}

SteeringProblem symmetrized(SteeringProblem p, const Tolerances& tol) {
  auto fix = [&](Matrix& m) {
    if (m.rows() == m.cols() && relative_asymmetry(m) <= tol.symmetry) m = symmetrize(m);
  };
  for (auto& m : p.Q) fix(m);
  for (auto& m : p.R) fix(m);
  fix(p.Sigma0);
  fix(p.SigmaN);
  return p;
}

Matrix phi_A(const SteeringProblem& p, int k, int l) {
  check_index(p, k);
  check_index(p, l);
  const Eigen::Index n = p.n();
  Matrix phi = Matrix::Identity(n, n);
  if (l < k) {
    for (int i = l; i < k; ++i) phi = p.A[i] * phi;
  } else {
    for (int i = k; i < l; ++i) phi = phi * p.A[i].partialPivLu().inverse();
  }
  return phi;
}

Matrix gramian(const SteeringProblem& p, int k, int l) {
  check_index(p, k);
  check_index(p, l);
  const Eigen::Index n = p.n();
  Matrix g = Matrix::Zero(n, n);
  const int lo = std::min(k, l);
  const int hi = std::max(k, l);
  for (int i = lo; i < hi; ++i) {
    const Matrix t = phi_A(p, k, i + 1) * p.B[i];
    g += t * t.transpose();
  }
  return k < l ? Matrix(-g) : g;
}

}  // namespace covsteer
