#pragma once
// Primal-dual interior-point core for the block-structured covariance SDP.
// Templated on the scalar so it can run in binary128.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/float128.hpp>

namespace Eigen {
template <>
struct NumTraits<boost::multiprecision::float128>
    : GenericNumTraits<boost::multiprecision::float128> {
  using Real = boost::multiprecision::float128;
  using NonInteger = Real;
  using Literal = Real;
  using Nested = Real;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 4,
    MulCost = 8
  };
  static Real epsilon() { return std::numeric_limits<Real>::epsilon(); }
  static Real dummy_precision() { return Real(1e-30); }
  static Real highest() { return std::numeric_limits<Real>::max(); }
  static Real lowest() { return -std::numeric_limits<Real>::max(); }
  static int digits10() { return 33; }
};
}  // namespace Eigen

namespace covsteer::detail {

using quad = boost::multiprecision::float128;

/*
 * Blocks Z_k = [[Σ_k, U_kᵀ],[U_k, Y_k]], k = 0…N−1, size n+p.
 * Constraint rows (symmetric n×n each):
 *   row 0     Σ̄₀ − PᵀZ_0P                         (Σ₀ pin)
 *   row k+1   V_kZ_kV_kᵀ + D_kD_kᵀ − PᵀZ_{k+1}P     (Σ̄_N in place of the last term)
 * with V_k = [A_k B_k], P = [I; 0]. Block k touches rows k and k+1 only, so
 * every operator matrix below is block tridiagonal.
 */
template <class T>
struct CoreData {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  int N = 0;
  Eigen::Index n = 0, p = 0;
  std::vector<Mat> V, C, DD;
  Mat Sigma0, SigmaN;

  Eigen::Index nb() const { return n + p; }
  Eigen::Index row_dim() const { return n * (n + 1) / 2; }

  // Constant part of each row.
  Mat row_constant(int i) const {
    if (i == 0) return Sigma0;
    Mat c = DD[i - 1];
    if (i == N) c -= SigmaN;
    return c;
  }
};

template <class T>
struct CoreState {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  std::vector<Mat> Z, S;  // N blocks
  std::vector<Mat> Lam;   // N+1 rows
  T mu = T(1);
};

struct CoreSettings {
  double mu0 = 1.0;
  double reduction = 10.0;
  double tol_gap = 1e-9;
  int max_newton = 50;
  double feas_tol = 1e-24;    // relative primal / dual infeasibility at a centred point
  double centrality = 0.25;   // ‖L_ZᵀSL_Z − μI‖_F ≤ centrality·μ per block
  double final_centrality = 1e-10;  // polish at the last μ; the multipliers come from here
  double step_fraction = 0.95;
  double sigma = 0.3;        // μ target as a fraction of the average gap while infeasible
  int max_phase_one = 200;   // steps allowed to reach feasibility from an infeasible start
};

struct CoreStats {
  bool converged = false;
  int newton_steps = 0;
  int centerings = 0;
  double mu = 0;
  double pinf = 0, dinf = 0;
  std::string failure;
};

template <class T>
class Core {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  explicit Core(const CoreData<T>& d) : d_(d) {
    const Eigen::Index n = d_.n;
    P_ = Mat::Zero(d_.nb(), n);
    P_.topRows(n).setIdentity();
    T bmax(0), cmax(0);
    for (int i = 0; i <= d_.N; ++i) bmax = std::max(bmax, T(d_.row_constant(i).norm()));
    for (const auto& c : d_.C) cmax = std::max(cmax, T(c.norm()));
    bscale_ = T(1) + bmax;
    cscale_ = T(1) + cmax;
  }

  static Mat sym(const Mat& m) { return (m + m.transpose()) / T(2); }
  static T sqrt2() {
    using std::sqrt;
    return sqrt(T(2));
  }

  // svec with √2 on off-diagonals, so ⟨svec a, svec b⟩ = ⟨a, b⟩_F.
  Vec svec(const Mat& m) const {
    const Eigen::Index n = d_.n;
    Vec v(d_.row_dim());
    const T r2 = sqrt2();
    Eigen::Index t = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i; j < n; ++j) v(t++) = i == j ? m(i, i) : r2 * m(i, j);
    return v;
  }

  Mat smat(const Vec& v) const {
    const Eigen::Index n = d_.n;
    Mat m(n, n);
    const T r2 = sqrt2();
    Eigen::Index t = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i; j < n; ++j) {
        const T x = i == j ? v(t) : v(t) / r2;
        m(i, j) = x;
        m(j, i) = x;
        ++t;
      }
    return m;
  }

  // Homogeneous part of the constraint map.
  std::vector<Mat> apply_hom(const std::vector<Mat>& X) const {
    const Eigen::Index n = d_.n;
    std::vector<Mat> out(d_.N + 1, Mat::Zero(n, n));
    for (int k = 0; k < d_.N; ++k) {
      out[k] -= P_.transpose() * X[k] * P_;
      out[k + 1] += d_.V[k] * X[k] * d_.V[k].transpose();
    }
    for (auto& o : out) o = sym(o);
    return out;
  }

  std::vector<Mat> residual(const std::vector<Mat>& Z) const {
    std::vector<Mat> r = apply_hom(Z);
    for (int i = 0; i <= d_.N; ++i) r[i] += d_.row_constant(i);
    return r;
  }

  std::vector<Mat> adjoint(const std::vector<Mat>& L) const {
    std::vector<Mat> out(d_.N);
    for (int k = 0; k < d_.N; ++k)
      out[k] = sym(d_.V[k].transpose() * L[k + 1] * d_.V[k] - P_ * L[k] * P_.transpose());
    return out;
  }

  // Matrix of Λ ↦ 𝒜(W(𝒜*Λ)) for a per-block linear W; exploits the tridiagonal pattern.
  template <class Weight>
  Mat operator_matrix(Weight&& weight) const {
    const Eigen::Index m = d_.row_dim();
    const Eigen::Index total = m * (d_.N + 1);
    Mat G = Mat::Zero(total, total);
    for (int i = 0; i <= d_.N; ++i) {
      for (Eigen::Index e = 0; e < m; ++e) {
        Vec unit = Vec::Zero(m);
        unit(e) = T(1);
        const Mat E = smat(unit);
        const Eigen::Index col = i * m + e;
        // Blocks touched by row i: k = i−1 through V, k = i through P.
        for (int k : {i - 1, i}) {
          if (k < 0 || k >= d_.N) continue;
          const Mat a = k == i - 1 ? Mat(d_.V[k].transpose() * E * d_.V[k])
                                   : Mat(-(P_ * E * P_.transpose()));
          const Mat X = weight(k, sym(a));
          G.block(k * m, col, m, 1) += svec(sym(-(P_.transpose() * X * P_)));
          G.block((k + 1) * m, col, m, 1) += svec(sym(d_.V[k] * X * d_.V[k].transpose()));
        }
      }
    }
    return G;
  }

  static bool is_pd(const Mat& X) { return Eigen::LLT<Mat>(X).info() == Eigen::Success; }

  // Largest α with X + α dX ⪰ 0 (infinity when dX does not leave the cone).
  static T max_step(const Mat& X, const Mat& dX) {
    Eigen::LLT<Mat> llt(X);
    const Mat L = llt.matrixL();
    const Mat Li = L.template triangularView<Eigen::Lower>().solve(
        Mat::Identity(X.rows(), X.cols()));
    const Mat W = sym(Li * dX * Li.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(W, Eigen::EigenvaluesOnly);
    const T lo = es.eigenvalues().minCoeff();
    return lo >= T(0) ? std::numeric_limits<T>::infinity() : T(-1) / lo;
  }

  Vec solve_sym(const Mat& M, const Vec& rhs) const {
    Eigen::LLT<Mat> llt(M);
    if (llt.info() == Eigen::Success) return llt.solve(rhs);
    return M.partialPivLu().solve(rhs);
  }

  Vec stack(const std::vector<Mat>& rows) const {
    const Eigen::Index m = d_.row_dim();
    Vec v(m * static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) v.segment(i * m, m) = svec(rows[i]);
    return v;
  }

  std::vector<Mat> unstack(const Vec& v) const {
    const Eigen::Index m = d_.row_dim();
    std::vector<Mat> out(v.size() / m);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = smat(v.segment(i * m, m));
    return out;
  }

  T primal_infeasibility(const std::vector<Mat>& Z) const {
    T r(0);
    for (const auto& g : residual(Z)) r = std::max(r, T(g.norm()));
    return r / bscale_;
  }

  std::vector<Mat> dual_residual(const CoreState<T>& s) const {
    std::vector<Mat> Rd = adjoint(s.Lam);
    for (int k = 0; k < d_.N; ++k) Rd[k] = sym(d_.C[k] + Rd[k] - s.S[k]);
    return Rd;
  }

  T dual_infeasibility(const CoreState<T>& s) const {
    T r(0);
    for (const auto& g : dual_residual(s)) r = std::max(r, T(g.norm()));
    return r / cscale_;
  }

  T centrality(const CoreState<T>& s) const {
    T worst(0);
    for (int k = 0; k < d_.N; ++k) {
      Eigen::LLT<Mat> llt(s.Z[k]);
      const Mat L = llt.matrixL();
      const Mat W = L.transpose() * s.S[k] * L;
      worst = std::max(worst,
                       T((W - s.mu * Mat::Identity(W.rows(), W.cols())).norm()));
    }
    return worst;
  }

  // Minimum-norm correction removing the primal equality residual.
  void project_primal(std::vector<Mat>& Z) const {
    const std::vector<Mat> r = residual(Z);
    const Mat GG = operator_matrix([](int, const Mat& a) { return a; });
    const Vec y = solve_sym(GG, -stack(r));
    const std::vector<Mat> corr = adjoint(unstack(y));
    std::vector<Mat> trial(d_.N);
    for (int k = 0; k < d_.N; ++k) {
      trial[k] = sym(Z[k] + corr[k]);
      if (!is_pd(trial[k])) return;
    }
    if (primal_infeasibility(trial) < primal_infeasibility(Z)) Z = std::move(trial);
  }

  // Dual slack set to C + 𝒜*Λ when that stays positive definite.
  void project_dual(CoreState<T>& s) const {
    std::vector<Mat> S = adjoint(s.Lam);
    for (int k = 0; k < d_.N; ++k) {
      S[k] = sym(d_.C[k] + S[k]);
      if (!is_pd(S[k])) return;
    }
    s.S = std::move(S);
  }

  // One HKM Newton step towards the μ-centre; returns the shorter step length.
  T newton_step(CoreState<T>& s, T fraction) const {
    const int N = d_.N;
    std::vector<Mat> Si(N);
    for (int k = 0; k < N; ++k)
      Si[k] = sym(s.S[k].llt().solve(Mat::Identity(s.S[k].rows(), s.S[k].cols())));
    const std::vector<Mat> rp = residual(s.Z);  // want 𝒜(ΔZ) = −rp
    const std::vector<Mat> Rd = dual_residual(s);

    const Mat M =
        operator_matrix([&](int k, const Mat& a) { return sym(s.Z[k] * a * Si[k]); });
    std::vector<Mat> base(N);
    for (int k = 0; k < N; ++k) base[k] = sym(s.mu * Si[k] - s.Z[k] - s.Z[k] * Rd[k] * Si[k]);
    const std::vector<Mat> Gb = apply_hom(base);
    Vec rhs = stack(Gb) + stack(rp);
    const std::vector<Mat> dL = unstack(solve_sym(M, rhs));
    const std::vector<Mat> Ad = adjoint(dL);

    std::vector<Mat> dZ(N), dS(N);
    for (int k = 0; k < N; ++k) {
      dS[k] = sym(Ad[k] + Rd[k]);
      dZ[k] = sym(base[k] - s.Z[k] * Ad[k] * Si[k]);
    }
    T ap(1), ad(1);
    for (int k = 0; k < N; ++k) {
      ap = std::min(ap, fraction * max_step(s.Z[k], dZ[k]));
      ad = std::min(ad, fraction * max_step(s.S[k], dS[k]));
    }
    auto all_pd = [&](const std::vector<Mat>& X, const std::vector<Mat>& dX, T a) {
      for (int k = 0; k < N; ++k)
        if (!is_pd(X[k] + a * dX[k])) return false;
      return true;
    };
    while (ap > T(1e-30) && !all_pd(s.Z, dZ, ap)) ap /= T(2);
    while (ad > T(1e-30) && !all_pd(s.S, dS, ad)) ad /= T(2);
    for (int k = 0; k < N; ++k) {
      s.Z[k] = sym(s.Z[k] + ap * dZ[k]);
      s.S[k] = sym(s.S[k] + ad * dS[k]);
    }
    for (int i = 0; i <= N; ++i) s.Lam[i] = sym(s.Lam[i] + ad * dL[i]);
    return std::min(ap, ad);
  }

  // Newton steps at fixed μ until feasible and within theta·μ of the centre.
  bool centre(CoreState<T>& s, const CoreSettings& cfg, double theta, CoreStats& st) const {
    const T feas(cfg.feas_tol);
    for (int it = 0;; ++it) {
      st.pinf = static_cast<double>(primal_infeasibility(s.Z));
      st.dinf = static_cast<double>(dual_infeasibility(s));
      if (T(st.pinf) <= feas && T(st.dinf) <= feas && centrality(s) <= T(theta) * s.mu)
        return true;
      if (it == cfg.max_newton) return false;
      newton_step(s, T(cfg.step_fraction));
      project_primal(s.Z);
      project_dual(s);
      ++st.newton_steps;
    }
  }

  T average_gap(const CoreState<T>& s) const {
    T g(0);
    for (int k = 0; k < d_.N; ++k) g += (s.Z[k] * s.S[k]).trace();
    return g / (T(d_.N) * T(d_.nb()));
  }

  // Infeasible start: follow μ = σ·⟨Z,S⟩/cone until both residuals vanish.
  bool reach_feasibility(CoreState<T>& s, const CoreSettings& cfg, CoreStats& st) const {
    const T feas(cfg.feas_tol);
    const T p0 = std::max(primal_infeasibility(s.Z), feas);
    const T d0 = std::max(dual_infeasibility(s), feas);
    bool short_step = false;
    const T gap0 = average_gap(s);
    for (int it = 0;; ++it) {
      st.pinf = static_cast<double>(primal_infeasibility(s.Z));
      st.dinf = static_cast<double>(dual_infeasibility(s));
      if (T(st.pinf) <= feas && T(st.dinf) <= feas) return true;
      if (it == cfg.max_phase_one) return false;
      // The gap may not outrun the infeasibility, or the iterates stall at the
      // boundary: the target never drops below gap₀ times the remaining fraction.
      const T lag = std::min(T(1), std::max(T(st.pinf) / p0, T(st.dinf) / d0));
      // After a short step, recentre before pushing the gap down again.
      const T sigma = short_step ? T(1) : T(cfg.sigma);
      s.mu = std::max(sigma * average_gap(s), gap0 * lag);
      short_step = newton_step(s, T(cfg.step_fraction)) < T(0.2);
      project_primal(s.Z);
      project_dual(s);
      ++st.newton_steps;
    }
  }

  CoreStats run(CoreState<T>& s, const CoreSettings& cfg) const {
    CoreStats st;
    const T cone = T(d_.N) * T(d_.nb());
    s.mu = T(cfg.mu0);
    const T feas(cfg.feas_tol);
    if (primal_infeasibility(s.Z) > feas || dual_infeasibility(s) > feas) {
      if (!reach_feasibility(s, cfg, st)) {
        st.mu = static_cast<double>(s.mu);
        st.failure = "infeasible start did not reach feasibility";
        return st;
      }
      // Join the schedule at the current gap.
      s.mu = average_gap(s);
    }
    for (;;) {
      const bool last = s.mu * cone <= T(cfg.tol_gap);
      const bool centred =
          centre(s, cfg, last ? cfg.final_centrality : cfg.centrality, st);
      ++st.centerings;
      st.mu = static_cast<double>(s.mu);
      if (!centred) {
        st.failure = "centering did not finish within max_newton steps at mu = " +
                     std::to_string(st.mu);
        return st;
      }
      if (last) {
        st.converged = true;
        return st;
      }
      s.mu /= T(cfg.reduction);
    }
  }

  const CoreData<T>& data() const { return d_; }

 private:
  const CoreData<T>& d_;
  Mat P_;
  T bscale_, cscale_;
};

}  // namespace covsteer::detail
