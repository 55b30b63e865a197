#pragma once

#include <string>
#include <vector>

#include "sresdmd/parallel.hpp"
#include "sresdmd/spectral.hpp"

namespace sresdmd {

enum class ResidualKind { residual, variance_residual };

const char* to_string(ResidualKind kind);

struct ComplexGrid {
  std::vector<cdouble> points;
  std::string provenance;  // "default(N)", "rectangle(...)" or "explicit"
};

/// (1/N)(Z + iZ) restricted to |z| <= N, imaginary part outer, real part inner.
ComplexGrid default_grid(int n);
/// n_re x n_im equispaced points including the endpoints, row-major by
/// imaginary part then real part.
ComplexGrid rectangle_grid(double re_min, double re_max, double im_min, double im_max, int n_re,
                           int n_im);
ComplexGrid explicit_grid(std::vector<cdouble> points);

template <typename Real>
struct MinResidual {
  Real value{};
  CVector<Real> minimizer;  // G-normalized
  bool clamped = false;
};

/// Minimizes the (variance-)residual over the dictionary span at many shifts,
/// reusing one Gram factorization. For each z the Hermitian matrix
/// W* [S - z A* - conj(z) A + |z|^2 G] W is formed on the retained subspace and
/// its smallest eigenpair gives the minimum and the minimizer.
template <typename Real>
class PseudospectrumSolver {
 public:
  PseudospectrumSolver(const BasicKoopmanMatrices<Real>& mats, ResidualKind kind,
                       const RegularizationPolicy& reg = {})
      : factor_(mats.G, reg), gram_(mats.G) {
    const CMatrix<Real>& s = kind == ResidualKind::residual
                                 ? mats.require_H("pseudospectrum (residual kind)")
                                 : mats.L;
    s_ = hermitian_part(factor_.whiten(s));
    t_ = factor_.whiten(mats.A);
  }

  MinResidual<Real> operator()(Complex<Real> z) const {
    CMatrix<Real> d = s_ - z * t_.adjoint() - std::conj(z) * t_;
    d.diagonal().array() += Complex<Real>(std::norm(z));
    Eigen::SelfAdjointEigenSolver<CMatrix<Real>> es(hermitian_part(d));
    MinResidual<Real> out;
    const Real lo = es.eigenvalues()(0);
    out.clamped = lo < Real(0);
    out.value = out.clamped ? Real(0) : std::sqrt(lo);
    out.minimizer = factor_.whitening() * es.eigenvectors().col(0);
    out.minimizer /= std::sqrt(std::real(out.minimizer.dot(gram_ * out.minimizer)));
    return out;
  }

  const GramFactor<Real>& factor() const { return factor_; }

 private:
  GramFactor<Real> factor_;
  CMatrix<Real> gram_;
  CMatrix<Real> s_, t_;
};

template <typename Real>
MinResidual<Real> min_residual(Complex<Real> z, const BasicKoopmanMatrices<Real>& mats,
                               ResidualKind kind, const RegularizationPolicy& reg = {}) {
  return PseudospectrumSolver<Real>(mats, kind, reg)(z);
}

template <typename Real>
struct PseudospectrumGrid {
  std::vector<Complex<Real>> points;
  std::vector<Real> values;
  std::vector<CVector<Real>> minimizers;
  ResidualKind kind = ResidualKind::variance_residual;
  Real epsilon{};
  std::string provenance;

  bool flagged(std::size_t i) const { return values[i] < epsilon; }
  std::size_t flagged_count() const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < values.size(); ++i) c += flagged(i);
    return c;
  }
};

/// Evaluates the minimized residual at every grid point; points with value
/// below epsilon approximate the (variance-)pseudospectrum.
template <typename Real>
PseudospectrumGrid<Real> pseudospectrum(const ComplexGrid& grid,
                                        const BasicKoopmanMatrices<Real>& mats, Real epsilon,
                                        ResidualKind kind, const RegularizationPolicy& reg = {},
                                        unsigned threads = 1) {
  if (!(epsilon > Real(0))) throw DomainError("pseudospectrum: epsilon must be > 0");
  if (grid.points.empty()) throw DomainError("pseudospectrum: empty grid");
  const PseudospectrumSolver<Real> solver(mats, kind, reg);
  PseudospectrumGrid<Real> out;
  const std::size_t n = grid.points.size();
  out.points.resize(n);
  out.values.resize(n);
  out.minimizers.resize(n);
  out.kind = kind;
  out.epsilon = epsilon;
  out.provenance = grid.provenance;
  parallel_for(n, threads, [&](std::size_t i) {
    const Complex<Real> z(static_cast<Real>(grid.points[i].real()),
                          static_cast<Real>(grid.points[i].imag()));
    auto r = solver(z);
    out.points[i] = z;
    out.values[i] = r.value;
    out.minimizers[i] = std::move(r.minimizer);
  });
  return out;
}

}  // namespace sresdmd
