#include "covsteer/linalg.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>

namespace covsteer {

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double relative_asymmetry(const Matrix& m) {
  if (m.rows() != m.cols()) return INFINITY;
  return (m - m.transpose()).norm() / (1.0 + m.norm());
}

SymmetricSpectrum spectrum(const Matrix& m) {
  SymmetricSpectrum s;
  if (m.size() == 0) return s;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  const Vector& ev = es.eigenvalues();
  s.min = ev.minCoeff();
  s.max = ev.maxCoeff();
  s.abs_max = ev.cwiseAbs().maxCoeff();
  return s;
}

double pd_margin(const Matrix& m) {
  const SymmetricSpectrum s = spectrum(m);
  return s.min / (1.0 + s.abs_max);
}

bool is_pd(const Matrix& m, double tol) { return pd_margin(m) >= tol; }

bool is_psd(const Matrix& m, double tol) { return pd_margin(m) >= -tol; }

double singular_ratio(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& sv = svd.singularValues();
  const double top = sv(0);
  if (!(top > 0.0)) return 0.0;
  return sv(sv.size() - 1) / top;
}

Vector vec(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

Matrix unvec(const Vector& v, Eigen::Index rows) {
  return Eigen::Map<const Matrix>(v.data(), rows, v.size() / rows);
}

Matrix kron(const Matrix& a, const Matrix& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

Matrix inverse_sqrt_spd(const Matrix& r) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(r));
  const Vector d = es.eigenvalues().cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace covsteer
