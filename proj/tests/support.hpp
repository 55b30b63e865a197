#pragma once

// Independent reference computations for the unit tests. Everything here is
// written as plain loops in long double so it shares no code path with the
// library's blocked products.

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <random>
#include <string>

#include "sresdmd/dictionary.hpp"
#include "sresdmd/matrices.hpp"
#include "sresdmd/snapshots.hpp"
#include "sresdmd/systems.hpp"

namespace testing {

using sresdmd::cdouble;
using sresdmd::Index;
using sresdmd::MatrixXc;
using sresdmd::VectorXc;
using cld = std::complex<long double>;

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("sresdmd_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline MatrixXc psi_rows(const sresdmd::Dictionary& dict, const sresdmd::StateMatrix& pts) {
  MatrixXc out(pts.rows(), dict.size());
  for (Index m = 0; m < pts.rows(); ++m) out.row(m) = dict(pts.row(m)).transpose();
  return out;
}

// sum_m w_m conj(a_mi) b_mj
inline MatrixXc weighted_gram(const MatrixXc& a, const MatrixXc& b, const sresdmd::VectorXd& w) {
  MatrixXc out(a.cols(), b.cols());
  for (Index i = 0; i < a.cols(); ++i)
    for (Index j = 0; j < b.cols(); ++j) {
      cld s = 0;
      for (Index m = 0; m < a.rows(); ++m)
        s += static_cast<long double>(w[m]) * std::conj(cld(a(m, i))) * cld(b(m, j));
      out(i, j) = cdouble(static_cast<double>(s.real()), static_cast<double>(s.imag()));
    }
  return out;
}

inline sresdmd::KoopmanMatrices brute_unbatched(const sresdmd::SnapshotSet& d, const sresdmd::Dictionary& dict) {
  const MatrixXc x = psi_rows(dict, d.states_x()), y = psi_rows(dict, d.states_y());
  sresdmd::KoopmanMatrices m;
  m.G = weighted_gram(x, x, d.weights());
  m.A = weighted_gram(x, y, d.weights());
  m.L = weighted_gram(y, y, d.weights());
  return m;
}

// All-pairs estimator written directly from its definition.
inline sresdmd::KoopmanMatrices brute_batched(const sresdmd::BatchedSnapshotSet& d, const sresdmd::Dictionary& dict) {
  const MatrixXc x = psi_rows(dict, d.states_x());
  std::vector<MatrixXc> ys;
  for (const auto& r : d.realizations()) ys.push_back(psi_rows(dict, r));
  const Index n = dict.size();
  const auto m2 = static_cast<double>(ys.size());
  sresdmd::KoopmanMatrices m;
  m.G = weighted_gram(x, x, d.weights());
  m.A = MatrixXc::Zero(n, n);
  m.L = MatrixXc::Zero(n, n);
  MatrixXc h = MatrixXc::Zero(n, n);
  for (std::size_t k = 0; k < ys.size(); ++k) {
    m.A += weighted_gram(x, ys[k], d.weights()) / m2;
    m.L += weighted_gram(ys[k], ys[k], d.weights()) / m2;
    for (std::size_t l = 0; l < ys.size(); ++l)
      if (l != k) h += weighted_gram(ys[k], ys[l], d.weights()) / (m2 * (m2 - 1));
  }
  m.H = h;
  return m;
}

// Circle map with amp = 0: min_j |z - alpha_j| and the variance version.
inline double circle_residual_oracle(cdouble z, const sresdmd::CircleMapConfig& cfg, int n) {
  double best = INFINITY;
  for (int j = -n; j <= n; ++j) best = std::min(best, std::abs(z - sresdmd::circle_alpha(j, cfg)));
  return best;
}

inline double circle_variance_oracle(cdouble z, const sresdmd::CircleMapConfig& cfg, int n) {
  double best = INFINITY;
  for (int j = -n; j <= n; ++j) {
    const cdouble a = sresdmd::circle_alpha(j, cfg);
    best = std::min(best, std::norm(z - a) + 1.0 - std::norm(a));
  }
  return std::sqrt(best);
}

inline VectorXc random_vector(Index n, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  VectorXc v(n);
  for (Index i = 0; i < n; ++i) v[i] = cdouble(nd(gen), nd(gen));
  return v;
}

inline MatrixXc random_matrix(Index r, Index c, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  MatrixXc m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = cdouble(nd(gen), nd(gen));
  return m;
}

// Random snapshot data on [0, 1) with a random smooth map plus noise.
inline sresdmd::SnapshotSet random_snapshots(Index m, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u;
  sresdmd::StateMatrix x(m, 1), y(m, 1);
  sresdmd::VectorXd w(m);
  for (Index i = 0; i < m; ++i) {
    x(i, 0) = u(gen);
    y(i, 0) = std::fmod(x(i, 0) + 0.3 + 0.1 * std::sin(6.0 * x(i, 0)) + 0.2 * u(gen), 1.0);
    w[i] = 0.5 + u(gen);
  }
  return {x, y, w};
}

}  // namespace testing
