#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sresdmd/dictionary.hpp"
#include "sresdmd/errors.hpp"
#include "sresdmd/snapshots.hpp"
#include "sresdmd/types.hpp"

namespace sresdmd {

struct AssemblyMeta {
  Index samples = 0;       // M for unbatched data, M1 for batched data
  Index realizations = 1;  // M2
  // "unbatched", "batched-pair" (M2 = 2) or "batched-all-pairs" (M2 > 2:
  // A and L averaged over every realization, H over every ordered pair k != k').
  std::string estimator = "unbatched";
  std::string dictionary;
  std::vector<std::string> labels;
};

/// Galerkin estimates of G = <psi_j, psi_i>, A = <K psi_j, psi_i>,
/// L (second moment of psi_j o F) and, for batched data, H = <K psi_j, K psi_i>.
template <typename Real>
struct BasicKoopmanMatrices {
  CMatrix<Real> G, A, L;
  std::optional<CMatrix<Real>> H;
  AssemblyMeta meta;

  Index size() const { return G.rows(); }
  bool has_H() const { return H.has_value(); }

  const CMatrix<Real>& require_H(std::string_view what) const {
    if (!H)
      throw CapabilityError(std::string(what) +
                            " requires the cross-batch matrix H; provide batched snapshots "
                            "with M2 >= 2 or bin the data (--bin)");
    return *H;
  }

  template <typename Other>
  BasicKoopmanMatrices<Other> cast() const {
    BasicKoopmanMatrices<Other> out;
    out.G = G.template cast<std::complex<Other>>();
    out.A = A.template cast<std::complex<Other>>();
    out.L = L.template cast<std::complex<Other>>();
    if (H) out.H = H->template cast<std::complex<Other>>();
    out.meta = meta;
    return out;
  }
};

using KoopmanMatrices = BasicKoopmanMatrices<double>;

template <typename Derived>
typename Derived::PlainObject hermitian_part(const Eigen::MatrixBase<Derived>& m) {
  return (m + m.adjoint()) / typename Derived::Scalar(2);
}

struct AssemblyOptions {
  unsigned threads = 1;
  // Samples evaluated per work item. Partial sums are combined pairwise in a
  // fixed tree, so results are bit-stable for a given chunk size regardless of
  // the thread count.
  Index chunk_samples = 4096;
};

/// G = Psi_X* W Psi_X, A = Psi_X* W Psi_Y, L = Psi_Y* W Psi_Y; H absent.
KoopmanMatrices assemble_unbatched(const SnapshotSet& data, const Dictionary& dict,
                                   const AssemblyOptions& opts = {});

/// Batched estimates with H; needs M2 >= 2.
KoopmanMatrices assemble_batched(const BatchedSnapshotSet& data, const Dictionary& dict,
                                 const AssemblyOptions& opts = {});

template <typename Real>
struct MatrixErrors {
  Real A{}, G{}, L{};
  std::optional<Real> H;
};

/// Frobenius norms of est - ref per matrix.
template <typename Real>
MatrixErrors<Real> estimation_error(const BasicKoopmanMatrices<Real>& est,
                                    const BasicKoopmanMatrices<Real>& ref) {
  const Index n = est.size();
  auto same = [n](const CMatrix<Real>& a, const CMatrix<Real>& b) {
    return a.rows() == n && a.cols() == n && b.rows() == n && b.cols() == n;
  };
  if (!same(est.G, ref.G) || !same(est.A, ref.A) || !same(est.L, ref.L))
    throw DomainError("estimation_error: shape mismatch");
  MatrixErrors<Real> e;
  e.A = (est.A - ref.A).norm();
  e.G = (est.G - ref.G).norm();
  e.L = (est.L - ref.L).norm();
  if (est.H && ref.H) {
    if (!same(*est.H, *ref.H)) throw DomainError("estimation_error: shape mismatch");
    e.H = (*est.H - *ref.H).norm();
  }
  return e;
}

/// Binary container: "SRDMDMAT", u32 version, u32 presence flags (G, A, L, H
/// in bits 0..3), u64 N, then each present matrix as N*N row-major
/// little-endian (re, im) doubles. Meta goes to "<path>.json".
void write_matrices(const std::filesystem::path& path, const KoopmanMatrices& mats);
KoopmanMatrices read_matrices(const std::filesystem::path& path);

/// Long-format CSV "i,j,re,im".
void write_matrix_csv(const std::filesystem::path& path, const MatrixXc& m);

}  // namespace sresdmd
