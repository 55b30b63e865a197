#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Eigenvalues>

#include "sresdmd/errors.hpp"
#include "sresdmd/matrices.hpp"
#include "sresdmd/types.hpp"

namespace sresdmd {

/// Relative singular-value threshold for the Gram matrix.
struct RegularizationPolicy {
  double rel_cutoff = 1e-12;

  void validate() const {
    if (!(rel_cutoff >= 0.0 && rel_cutoff < 1.0))
      throw DomainError("rel_cutoff must lie in [0, 1)");
  }
};

/// Truncated eigen-factorization G ~ V S V* of a Hermitian PSD Gram matrix,
/// restricted to eigenvalues above rel_cutoff * max. The whitening map
/// W = V_r S_r^{-1/2} turns the pencil (X, G) into the plain matrix W* X W.
template <typename Real>
class GramFactor {
 public:
  GramFactor(const CMatrix<Real>& gram, const RegularizationPolicy& reg) {
    reg.validate();
    if (gram.rows() != gram.cols() || gram.rows() == 0) throw DomainError("Gram matrix must be square");
    Eigen::SelfAdjointEigenSolver<CMatrix<Real>> es(gram);
    const auto& vals = es.eigenvalues();  // ascending
    const Real top = vals(vals.size() - 1);
    if (!(top > Real(0)) || !std::isfinite(static_cast<double>(top)))
      throw RankError("Gram matrix is numerically zero");
    const Real cutoff = static_cast<Real>(reg.rel_cutoff) * top;
    Index first = 0;
    while (first < vals.size() && !(vals(first) > cutoff)) ++first;
    const Index r = vals.size() - first;
    if (r == 0) throw RankError("no Gram eigenvalue above the cutoff");
    values_ = vals.tail(r);
    basis_ = es.eigenvectors().rightCols(r);
    whitening_ = basis_ * values_.cwiseSqrt().cwiseInverse().template cast<Complex<Real>>().asDiagonal();
  }

  Index rank() const { return values_.size(); }
  Index size() const { return basis_.rows(); }
  const RVector<Real>& retained_values() const { return values_; }
  const CMatrix<Real>& basis() const { return basis_; }
  const CMatrix<Real>& whitening() const { return whitening_; }

  /// W* X W.
  CMatrix<Real> whiten(const CMatrix<Real>& x) const { return whitening_.adjoint() * x * whitening_; }

  /// Truncated pseudoinverse V_r S_r^{-1} V_r*.
  CMatrix<Real> pseudoinverse() const {
    return basis_ * values_.cwiseInverse().template cast<Complex<Real>>().asDiagonal() *
           basis_.adjoint();
  }

 private:
  RVector<Real> values_;
  CMatrix<Real> basis_;
  CMatrix<Real> whitening_;
};

template <typename Real>
struct ResidualValue {
  Real value{};    // sqrt(max(0, squared))
  Real squared{};  // unclamped quadratic-form ratio
  bool clamped = false;
};

template <typename Real>
struct SpectralResult {
  Complex<Real> eigenvalue;
  CVector<Real> coeffs;  // normalized to g* G g = 1
  Real res_var{};
  bool res_var_clamped = false;
  std::optional<Real> res;
  bool res_clamped = false;
  std::optional<Real> integrated_variance;
};

namespace detail {

template <typename Real>
Real gram_norm2(const CVector<Real>& g, const CMatrix<Real>& gram) {
  const Real n2 = std::real(g.dot(gram * g));
  if (!(n2 > Real(0))) throw DomainError("coefficient vector has zero G-norm");
  return n2;
}

// g* [S - lambda A* - conj(lambda) A + |lambda|^2 G] g / g* G g
template <typename Real>
ResidualValue<Real> residual_form(const CMatrix<Real>& second_moment, Complex<Real> lambda,
                                  const CVector<Real>& g, const BasicKoopmanMatrices<Real>& mats) {
  const Index n = mats.size();
  if (g.size() != n) throw DomainError("coefficient vector length does not match N");
  const Real gg = gram_norm2(g, mats.G);
  const Real sg = std::real(g.dot(second_moment * g));
  const Complex<Real> ag = g.dot(mats.A * g);
  const Real num = sg - Real(2) * std::real(std::conj(lambda) * ag) + std::norm(lambda) * gg;
  ResidualValue<Real> out;
  out.squared = num / gg;
  out.clamped = out.squared < Real(0);
  out.value = out.clamped ? Real(0) : std::sqrt(out.squared);
  return out;
}

template <typename Real>
bool modulus_then_argument(const Complex<Real>& a, const Complex<Real>& b) {
  const Real ma = std::abs(a), mb = std::abs(b);
  const Real tol = Real(1e-12) * std::max({ma, mb, Real(1)});
  if (std::abs(ma - mb) > tol) return ma > mb;
  return std::arg(a) < std::arg(b);
}

}  // namespace detail

/// Variance residual: uses L, available for any snapshot data.
template <typename Real>
ResidualValue<Real> res_var(Complex<Real> lambda, const CVector<Real>& g,
                            const BasicKoopmanMatrices<Real>& mats) {
  return detail::residual_form(mats.L, lambda, g, mats);
}

/// Residual of the expectation operator: needs H from batched data.
template <typename Real>
ResidualValue<Real> res(Complex<Real> lambda, const CVector<Real>& g,
                        const BasicKoopmanMatrices<Real>& mats) {
  return detail::residual_form(mats.require_H("res"), lambda, g, mats);
}

/// g* (L - H) g / g* G g.
template <typename Real>
Real integrated_variance(const CVector<Real>& g, const BasicKoopmanMatrices<Real>& mats) {
  const auto& h = mats.require_H("integrated_variance");
  if (g.size() != mats.size()) throw DomainError("coefficient vector length does not match N");
  const Real gg = detail::gram_norm2(g, mats.G);
  return std::real(g.dot((mats.L - h) * g)) / gg;
}

/// L - H, the Galerkin covariance of the dictionary under one random step.
template <typename Real>
CMatrix<Real> covariance_matrix(const BasicKoopmanMatrices<Real>& mats) {
  return mats.L - mats.require_H("covariance_matrix");
}

/// EDMD eigenpairs of A g = lambda G g on the retained Gram subspace, sorted by
/// descending modulus then ascending argument. Residual fields are left empty.
template <typename Real>
std::vector<SpectralResult<Real>> solve_eigenpairs(const BasicKoopmanMatrices<Real>& mats,
                                                   const RegularizationPolicy& reg = {}) {
  const GramFactor<Real> factor(mats.G, reg);
  const CMatrix<Real> t = factor.whiten(mats.A);
  Eigen::ComplexEigenSolver<CMatrix<Real>> ces(t);
  if (ces.info() != Eigen::Success) throw RankError("eigensolver did not converge");
  std::vector<SpectralResult<Real>> out(static_cast<std::size_t>(t.rows()));
  for (Index i = 0; i < t.rows(); ++i) {
    auto& r = out[static_cast<std::size_t>(i)];
    r.eigenvalue = ces.eigenvalues()(i);
    r.coeffs = factor.whitening() * ces.eigenvectors().col(i);
    r.coeffs /= std::sqrt(detail::gram_norm2(r.coeffs, mats.G));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return detail::modulus_then_argument(a.eigenvalue, b.eigenvalue);
  });
  return out;
}

/// Eigenpairs with res_var, and with res and integrated variance when H is
/// available.
template <typename Real>
std::vector<SpectralResult<Real>> analyze_eigenpairs(const BasicKoopmanMatrices<Real>& mats,
                                                     const RegularizationPolicy& reg = {}) {
  auto pairs = solve_eigenpairs(mats, reg);
  for (auto& p : pairs) {
    const auto rv = res_var(p.eigenvalue, p.coeffs, mats);
    p.res_var = rv.value;
    p.res_var_clamped = rv.clamped;
    if (mats.has_H()) {
      const auto r = res(p.eigenvalue, p.coeffs, mats);
      p.res = r.value;
      p.res_clamped = r.clamped;
      p.integrated_variance = integrated_variance(p.coeffs, mats);
    }
  }
  return pairs;
}

}  // namespace sresdmd
