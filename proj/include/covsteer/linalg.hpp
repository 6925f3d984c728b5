#pragma once

#include <Eigen/Dense>

namespace covsteer {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Numerical margins shared by every module.
struct Tolerances {
  double psd = 1e-10;       // X ⪰ 0 iff λ_min ≥ −psd·(1+|λ|_max)
  double pd = 1e-10;        // X ≻ 0 iff λ_min ≥ pd·(1+|λ|_max)
  double singular = 1e-12;  // invertible iff σ_min > singular·σ_max
  double symmetry = 1e-9;   // relative asymmetry accepted on ingestion
};

Matrix symmetrize(const Matrix& m);

/// ‖M − Mᵀ‖_F / (1 + ‖M‖_F).
double relative_asymmetry(const Matrix& m);

struct SymmetricSpectrum {
  double min = 0.0;
  double max = 0.0;
  double abs_max = 0.0;
};

/// Extreme eigenvalues of the symmetric part of m.
SymmetricSpectrum spectrum(const Matrix& m);

/// λ_min / (1 + |λ|_max), the scale-aware margin used by every PSD/PD test.
double pd_margin(const Matrix& m);

bool is_pd(const Matrix& m, double tol);
bool is_psd(const Matrix& m, double tol);

/// σ_min / σ_max (0 for an empty or zero matrix).
double singular_ratio(const Matrix& m);

/// Column-major stacking.
Vector vec(const Matrix& m);
Matrix unvec(const Vector& v, Eigen::Index rows);

Matrix kron(const Matrix& a, const Matrix& b);

/// R^{-1/2} for symmetric positive definite R, via eigendecomposition.
Matrix inverse_sqrt_spd(const Matrix& r);

}  // namespace covsteer
