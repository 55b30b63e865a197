#include <doctest.h>

#include <random>

#include "sresdmd/errors.hpp"
#include "sresdmd/spectral.hpp"
#include "sresdmd/systems.hpp"
#include "support.hpp"

using namespace sresdmd;

namespace {

KoopmanMatrices diagonal_pencil() {
  KoopmanMatrices m;
  m.G = MatrixXc::Identity(2, 2);
  m.A = MatrixXc::Zero(2, 2);
  m.A(0, 0) = 0.5;
  m.A(1, 1) = cdouble(0, 0.9);
  m.L = m.A.adjoint() * m.A;
  m.H = m.L;
  return m;
}

CircleMapConfig circle(double sigma) {
  CircleMapConfig c;
  c.amp = 0.0;
  c.noise_sigma = sigma;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("diagonal pencil eigenpairs are sorted by modulus") {
  const auto pairs = solve_eigenpairs(diagonal_pencil());
  REQUIRE(pairs.size() == 2);
  CHECK(std::abs(pairs[0].eigenvalue - cdouble(0, 0.9)) < 1e-15);
  CHECK(std::abs(pairs[1].eigenvalue - cdouble(0.5)) < 1e-15);
  CHECK(std::abs(std::abs(pairs[0].coeffs(1)) - 1.0) < 1e-15);
  CHECK(std::abs(pairs[0].coeffs(0)) < 1e-15);
  CHECK(std::abs(std::abs(pairs[1].coeffs(0)) - 1.0) < 1e-15);
}

TEST_CASE("ties in modulus are broken by argument") {
  KoopmanMatrices m;
  m.G = MatrixXc::Identity(3, 3);
  m.A = MatrixXc::Zero(3, 3);
  m.A(0, 0) = cdouble(0, 1);
  m.A(1, 1) = cdouble(0, -1);
  m.A(2, 2) = 1.0;
  m.L = MatrixXc::Identity(3, 3);
  const auto p = solve_eigenpairs(m);
  CHECK(std::abs(p[0].eigenvalue - cdouble(0, -1)) < 1e-14);
  CHECK(std::abs(p[1].eigenvalue - cdouble(1)) < 1e-14);
  CHECK(std::abs(p[2].eigenvalue - cdouble(0, 1)) < 1e-14);
}

TEST_CASE("exact circle matrices: eigenvalues, residuals and variance") {
  for (double sigma : {0.3, 0.5, 0.9}) {
    const auto cfg = circle(sigma);
    const int n = 4;
    const auto ref = circle_reference_matrices(cfg, n);
    const auto pairs = analyze_eigenpairs(ref);
    REQUIRE(pairs.size() == 9);
    // every alpha_j appears with its multiplicity (sigma = 1/2 zeroes the even modes)
    for (int j = -n; j <= n; ++j) {
      const cdouble a = circle_alpha(j, cfg);
      int hits = 0, mult = 0;
      for (const auto& p : pairs) hits += std::abs(p.eigenvalue - a) < 1e-12;
      for (int i = -n; i <= n; ++i) mult += std::abs(circle_alpha(i, cfg) - a) < 1e-12;
      CHECK(hits == mult);
    }
    for (const auto& p : pairs) {
      CHECK(*p.res < 1e-7);
      CHECK(std::abs(p.res_var - std::sqrt(1.0 - std::norm(p.eigenvalue))) < 1e-7);
      CHECK(std::abs(*p.integrated_variance - (1.0 - std::norm(p.eigenvalue))) < 1e-12);
    }
    for (int j = -n; j <= n; ++j) {
      const VectorXc e = VectorXc::Unit(9, j + n);
      const cdouble a = circle_alpha(j, cfg);
      CHECK(res(a, e, ref).value < 1e-7);
      CHECK(std::abs(res_var(a, e, ref).value - std::sqrt(circle_variance(j, cfg))) < 1e-12);
    }
  }
}

TEST_CASE("covariance matrix for uniform noise on [0,1]") {
  const auto cfg = circle(1.0);
  const auto cov = covariance_matrix(circle_reference_matrices(cfg, 3));
  for (Index i = 0; i < 7; ++i)
    for (Index j = 0; j < 7; ++j) {
      const double expect = (i == j && i != 3) ? 1.0 : 0.0;
      CHECK(std::abs(cov(i, j) - expect) < 1e-14);
    }
  CHECK(cov == MatrixXc(cov.adjoint()));
}

TEST_CASE("residual of a large shift is dominated by |lambda|") {
  const auto ref = circle_reference_matrices(circle(0.5), 2);
  const VectorXc g = VectorXc::Unit(5, 1);
  double prev = INFINITY;
  for (double r : {1e2, 1e4, 1e6}) {
    const double ratio = res(cdouble(r, r), g, ref).value / (r * std::sqrt(2.0));
    CHECK(std::abs(ratio - 1.0) < 2.0 / r);
    CHECK(std::abs(ratio - 1.0) <= prev);
    prev = std::abs(ratio - 1.0);
  }
}

TEST_CASE("res_var^2 - res^2 equals the integrated variance for estimated matrices") {
  std::mt19937_64 gen(11);
  CircleMapConfig cfg;
  cfg.seed = 5;
  const auto m = assemble_batched(generate_circle_batched(cfg, 40, 30), fourier_dictionary(3));
  for (int trial = 0; trial < 50; ++trial) {
    const VectorXc g = testing::random_vector(7, gen);
    const cdouble lam = testing::random_vector(1, gen)(0);
    const auto rv = res_var(lam, g, m), r = res(lam, g, m);
    const double scale = std::max({1.0, std::abs(rv.squared), std::abs(r.squared)});
    CHECK(std::abs(rv.squared - r.squared - integrated_variance(g, m)) < 1e-12 * scale);
    CHECK(rv.squared >= r.squared - 1e-12 * scale);
  }
}

TEST_CASE("deterministic data: L == H makes res == res_var and zero variance") {
  VdpConfig cfg;
  cfg.delta = 0.0;
  cfg.burn_in = 3000;
  const auto b = vdp_batched_from_trajectory(cfg, 400);
  const auto m = assemble_batched(b, laplacian_rbf_dictionary(pick_centers(b.states_x(), 12, 0)));
  const auto pairs = analyze_eigenpairs(m);
  for (const auto& p : pairs) {
    CHECK(*p.res == p.res_var);
    CHECK(*p.integrated_variance == 0.0);
  }
  CHECK(covariance_matrix(m).isZero(0.0));
}

TEST_CASE("trivial eigenvalue of a measure-preserving system has small variance residual") {
  CircleMapConfig cfg;  // amp = 1/(4 pi), uniform noise: Lebesgue measure is invariant
  cfg.seed = 21;
  for (Index m2 : {100, 2000}) {
    const auto m = assemble_batched(generate_circle_batched(cfg, 64, m2), fourier_dictionary(3));
    const VectorXc one = VectorXc::Unit(7, 3);
    CHECK(res_var(cdouble(1), one, m).value < 3.0 / std::sqrt(double(m2)));
    CHECK(integrated_variance(one, m) < 1e-12);
  }
}

TEST_CASE("unbatched matrices have res_var but no res") {
  std::mt19937_64 gen(12);
  const auto m = assemble_unbatched(testing::random_snapshots(500, gen), fourier_dictionary(2));
  const auto pairs = analyze_eigenpairs(m);
  for (const auto& p : pairs) {
    CHECK_FALSE(p.res.has_value());
    CHECK_FALSE(p.integrated_variance.has_value());
    CHECK(p.res_var >= 0.0);
  }
  CHECK_THROWS_AS(res(cdouble(1), VectorXc(VectorXc::Ones(5)), m), CapabilityError);
  CHECK_THROWS_AS(covariance_matrix(m), CapabilityError);
}

TEST_CASE("eigenpairs are closed under conjugation for real dynamics") {
  CircleMapConfig cfg;
  cfg.seed = 2;
  const auto m = assemble_batched(generate_circle_batched(cfg, 64, 50), fourier_dictionary(4));
  const auto pairs = analyze_eigenpairs(m);
  for (const auto& p : pairs) {
    double best = INFINITY;
    for (const auto& q : pairs) best = std::min(best, std::abs(q.eigenvalue - std::conj(p.eigenvalue)));
    CHECK(best < 1e-10);
    CHECK(std::abs(std::real(p.coeffs.dot(m.G * p.coeffs)) - 1.0) < 1e-12);
  }
}

TEST_CASE("rank-deficient Gram matrices are truncated") {
  StateMatrix x(3, 1);
  x << 0.0, 0.25, 0.5;
  const SnapshotSet s(x, x, monte_carlo_weights(3));
  // 5 Fourier modes on 3 points: G has rank 3
  const auto m = assemble_unbatched(s, fourier_dictionary(2));
  const GramFactor<double> f(m.G, {});
  CHECK(f.rank() == 3);
  const auto pairs = solve_eigenpairs(m);
  CHECK(pairs.size() == 3);
  for (const auto& p : pairs) CHECK(std::abs(p.eigenvalue - cdouble(1)) < 1e-10);
  CHECK_THROWS_AS(res_var(cdouble(1), VectorXc(VectorXc::Zero(5)), m), DomainError);
}

TEST_CASE("single precision instantiation agrees with double") {
  const auto ref = circle_reference_matrices(circle(0.5), 2);
  const auto pf = analyze_eigenpairs(ref.cast<float>());
  const auto pd = analyze_eigenpairs(ref);
  REQUIRE(pf.size() == pd.size());
  for (std::size_t i = 0; i < pf.size(); ++i)
    CHECK(std::abs(std::complex<double>(pf[i].eigenvalue) - pd[i].eigenvalue) < 1e-5);
}
