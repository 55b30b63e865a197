#pragma once

#include <complex>
#include <cstdint>

#include <Eigen/Dense>

namespace sresdmd {

// Dense types templated on the real scalar. Complex matrices carry the
// dictionary evaluations and every Galerkin estimate.
template <typename Real> using Complex = std::complex<Real>;
template <typename Real>
using CMatrix = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using CVector = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;
template <typename Real>
using RMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using RVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

using cdouble = std::complex<double>;
using MatrixXc = CMatrix<double>;
using VectorXc = CVector<double>;
// State matrices are row-major: one sample per row.
using StateMatrix = RMatrix<double>;
using Eigen::VectorXd;

using Index = Eigen::Index;

}  // namespace sresdmd
