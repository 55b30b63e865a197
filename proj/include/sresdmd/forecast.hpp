#pragma once

#include <cmath>
#include <utility>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "sresdmd/spectral.hpp"

namespace sresdmd {

/// K = G^+ A with the truncated pseudoinverse of G.
template <typename Real>
CMatrix<Real> koopman_matrix(const BasicKoopmanMatrices<Real>& mats,
                             const RegularizationPolicy& reg = {}) {
  return GramFactor<Real>(mats.G, reg).pseudoinverse() * mats.A;
}

/// K^n g by repeated multiplication.
template <typename Real>
CVector<Real> iterate(const CMatrix<Real>& k, CVector<Real> g, int n) {
  if (n < 0) throw DomainError("iterate: horizon must be >= 0");
  if (k.rows() != k.cols() || k.cols() != g.size()) throw DomainError("iterate: shape mismatch");
  for (int i = 0; i < n; ++i) g = k * g;
  return g;
}

template <typename Real>
Real spectral_norm(const CMatrix<Real>& m) {
  if (m.size() == 0) return Real(0);
  return Eigen::JacobiSVD<CMatrix<Real>>(m).singularValues()(0);
}

namespace detail {

// f(G) for Hermitian positive definite G via its eigendecomposition.
template <typename Real, typename Fn>
CMatrix<Real> hermitian_function(const CMatrix<Real>& g, Fn&& fn, const char* what) {
  Eigen::SelfAdjointEigenSolver<CMatrix<Real>> es(hermitian_part(g));
  const auto& vals = es.eigenvalues();
  const Real top = vals(vals.size() - 1);
  if (!(vals(0) > Real(1e-14) * std::max(top, Real(1))))
    throw RankError(std::string(what) + " is not positive definite");
  RVector<Real> f = vals.unaryExpr(fn);
  return es.eigenvectors() * f.template cast<Complex<Real>>().asDiagonal() *
         es.eigenvectors().adjoint();
}

}  // namespace detail

/// Largest singular value of the whitened EDMD matrix, a data-driven stand-in
/// for the operator norm of K.
template <typename Real>
Real estimate_norm_K(const BasicKoopmanMatrices<Real>& mats, const RegularizationPolicy& reg = {}) {
  const GramFactor<Real> factor(mats.G, reg);
  return spectral_norm(factor.whiten(mats.A));
}

struct Deltas {
  double delta_G = 0.0;
  double delta_A = 0.0;
};

/// Delta_G and Delta_A of the forecast bound from estimated and reference
/// matrices, with I_G = G^{1/2} Gt^{-1/2}. All norms are spectral.
template <typename Real>
Deltas deltas_from_reference(const BasicKoopmanMatrices<Real>& est,
                             const BasicKoopmanMatrices<Real>& ref, Real norm_K) {
  if (!(norm_K >= Real(0))) throw DomainError("deltas_from_reference: norm_K must be >= 0");
  const Index n = ref.size();
  if (est.size() != n) throw DomainError("deltas_from_reference: shape mismatch");
  const CMatrix<Real> g_half =
      detail::hermitian_function(ref.G, [](Real v) { return std::sqrt(v); }, "reference G");
  const CMatrix<Real> g_inv_half =
      detail::hermitian_function(ref.G, [](Real v) { return Real(1) / std::sqrt(v); }, "reference G");
  const CMatrix<Real> gt_inv_half =
      detail::hermitian_function(est.G, [](Real v) { return Real(1) / std::sqrt(v); }, "estimated G");
  const CMatrix<Real> i_g = g_half * gt_inv_half;
  const CMatrix<Real> id = CMatrix<Real>::Identity(n, n);
  const Real n_ig = spectral_norm(i_g);
  const Real dg = n_ig * spectral_norm<Real>(id - i_g.inverse()) + spectral_norm<Real>(id - i_g);
  const Real da = norm_K * (Real(1) + n_ig) * spectral_norm<Real>(i_g - id) +
                  n_ig * n_ig * spectral_norm<Real>(g_inv_half * (ref.A - est.A) * g_inv_half);
  return {static_cast<double>(dg), static_cast<double>(da)};
}

/// sum_{j=1..n} norm_K^{n-j} e_j with e_j the one-step defect of v = K^{j-1} g,
/// e^2 = v* H v - 2 Re(v* K* A v) + v* K* G K v (clamped at zero).
template <typename Real>
Real subspace_error(const BasicKoopmanMatrices<Real>& mats, const CMatrix<Real>& k,
                    const CVector<Real>& g, int n, Real norm_K) {
  const auto& h = mats.require_H("subspace_error");
  if (n < 0) throw DomainError("subspace_error: horizon must be >= 0");
  if (g.size() != mats.size() || k.rows() != mats.size()) throw DomainError("subspace_error: shape mismatch");
  Real total(0);
  CVector<Real> v = g;
  for (int j = 1; j <= n; ++j) {
    const CVector<Real> kv = k * v;
    const Real e2 = std::real(v.dot(h * v)) - Real(2) * std::real(kv.dot(mats.A * v)) +
                    std::real(kv.dot(mats.G * kv));
    const Real e = e2 > Real(0) ? std::sqrt(e2) : Real(0);
    total += std::pow(norm_K, Real(n - j)) * e;
    v = kv;
  }
  return total;
}

struct ForecastBoundInputs {
  double norm_K = 1.0;
  double delta_G = 0.0;
  double delta_A = 0.0;
  double delta_n = 0.0;
};

/// Forecast error constant C_n; requires norm_K > delta_A.
double forecast_error_bound(const ForecastBoundInputs& in, int n);

/// P(|X - E X| >= a) <= min(1, var / a^2).
double chernoff_bound(double variance, double a);

}  // namespace sresdmd
