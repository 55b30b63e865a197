#include <doctest.h>

#include <fstream>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

#include "sresdmd/errors.hpp"
#include "sresdmd/matrices.hpp"
#include "sresdmd/systems.hpp"
#include "support.hpp"

using namespace sresdmd;

namespace {

double rel(const MatrixXc& a, const MatrixXc& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

double min_eig(const MatrixXc& m) {
  return Eigen::SelfAdjointEigenSolver<MatrixXc>(m, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

BatchedSnapshotSet random_batched(Index m1, Index m2, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u;
  StateMatrix x(m1, 1);
  std::vector<StateMatrix> ys(m2, StateMatrix(m1, 1));
  VectorXd w(m1);
  for (Index l = 0; l < m1; ++l) {
    x(l, 0) = u(gen);
    w[l] = 0.2 + u(gen);
    for (auto& y : ys) y(l, 0) = std::fmod(x(l, 0) + 0.25 + 0.3 * u(gen), 1.0);
  }
  return {x, ys, w};
}

}  // namespace

TEST_CASE("single snapshot with the constant function") {
  StateMatrix x(1, 1);
  x << 0.4;
  VectorXd w(1);
  w << 1.0;
  const auto m = assemble_unbatched(SnapshotSet(x, x, w), fourier_dictionary(0));
  CHECK(m.G(0, 0) == cdouble(1));
  CHECK(m.A(0, 0) == cdouble(1));
  CHECK(m.L(0, 0) == cdouble(1));
  CHECK_FALSE(m.has_H());
  CHECK(m.meta.estimator == "unbatched");

  VectorXd w2(1);
  w2 << 0.7;
  const auto b = assemble_batched(BatchedSnapshotSet(x, {x, x}, w2), fourier_dictionary(0));
  for (const MatrixXc* mm : {&b.G, &b.A, &b.L, &*b.H}) CHECK((*mm)(0, 0) == cdouble(0.7));
}

TEST_CASE("identity map gives A == G == L exactly") {
  std::mt19937_64 gen(1);
  const auto s = testing::random_snapshots(3000, gen);
  const SnapshotSet id(s.states_x(), s.states_x(), s.weights());
  for (const auto& d : {fourier_dictionary(4), laplacian_rbf_dictionary(pick_centers(s.states_x(), 6, 0))}) {
    const auto m = assemble_unbatched(id, d);
    CHECK(m.A == m.G);
    CHECK(m.L == m.G);
  }
}

TEST_CASE("assembly matches the direct weighted sums") {
  std::mt19937_64 gen(2);
  const auto s = testing::random_snapshots(777, gen);
  const auto d = fourier_dictionary(3);
  const auto ref = testing::brute_unbatched(s, d);
  AssemblyOptions small;
  small.chunk_samples = 50;  // several chunks and an uneven tail
  for (const auto& opts : {AssemblyOptions{}, small}) {
    const auto m = assemble_unbatched(s, d, opts);
    CHECK(rel(m.G, ref.G) < 1e-13);
    CHECK(rel(m.A, ref.A) < 1e-13);
    CHECK(rel(m.L, ref.L) < 1e-13);
  }

  for (Index m2 : {2, 3, 5}) {
    const auto b = random_batched(301, m2, gen);
    const auto bref = testing::brute_batched(b, d);
    AssemblyOptions o;
    o.chunk_samples = 64;
    const auto m = assemble_batched(b, d, o);
    CHECK(rel(m.G, bref.G) < 1e-13);
    CHECK(rel(m.A, bref.A) < 1e-13);
    CHECK(rel(m.L, bref.L) < 1e-13);
    CHECK(rel(*m.H, *bref.H) < 1e-13);
    CHECK(m.meta.realizations == m2);
    CHECK(m.meta.estimator == (m2 == 2 ? "batched-pair" : "batched-all-pairs"));
  }
}

TEST_CASE("assemble_batched rejects a single realization") {
  std::mt19937_64 gen(3);
  const auto b = random_batched(10, 1, gen);
  CHECK_THROWS_AS(assemble_batched(b, fourier_dictionary(1)), DomainError);
}

TEST_CASE("dimension mismatch is a domain error") {
  StateMatrix x(3, 2);
  x.setRandom();
  CHECK_THROWS_AS(assemble_unbatched(SnapshotSet(x, x, monte_carlo_weights(3)), fourier_dictionary(1)),
                  DomainError);
}

TEST_CASE("identical realizations give H == L exactly") {
  VdpConfig cfg;
  cfg.delta = 0.0;
  cfg.burn_in = 2000;
  cfg.seed = 4;
  const auto b = vdp_batched_from_trajectory(cfg, 500);
  CHECK(b.realization(0) == b.realization(1));
  const auto d = laplacian_rbf_dictionary(pick_centers(b.states_x(), 15, 0));
  const auto m = assemble_batched(b, d);
  CHECK(*m.H == m.L);

  std::mt19937_64 gen(4);
  const auto r = random_batched(200, 2, gen);
  const BatchedSnapshotSet dup(r.states_x(), {r.realization(0), r.realization(0), r.realization(0)}, r.weights());
  const auto m3 = assemble_batched(dup, fourier_dictionary(3));
  CHECK(rel(*m3.H, m3.L) < 1e-14);
}

TEST_CASE("circle map with amp = 0 converges to the analytic matrices") {
  CircleMapConfig cfg;
  cfg.amp = 0.0;
  cfg.noise_sigma = 0.5;
  cfg.seed = 9;
  const int n = 2;
  const auto ref = circle_reference_matrices(cfg, n);
  for (int j = -n; j <= n; ++j) CHECK(std::abs(ref.A(j + n, j + n) - circle_alpha(j, cfg)) < 1e-15);

  double prev = INFINITY;
  for (Index m2 : {100, 1600}) {
    const auto m = assemble_batched(generate_circle_batched(cfg, 64, m2), fourier_dictionary(n));
    CHECK((m.G - MatrixXc::Identity(5, 5)).norm() < 1e-13);
    const double err = (m.A - ref.A).cwiseAbs().maxCoeff();
    CHECK(err < 5.0 / std::sqrt(double(m2)));
    CHECK(err < prev);
    prev = err;
  }

  cfg.noise_sigma = 1.0;
  const auto m = assemble_batched(generate_circle_batched(cfg, 64, 4000), fourier_dictionary(n));
  MatrixXc h_ref = MatrixXc::Zero(5, 5);
  h_ref(n, n) = 1.0;
  CHECK((*m.H - h_ref).cwiseAbs().maxCoeff() < 5.0 / std::sqrt(4000.0));
  CHECK((m.L - MatrixXc::Identity(5, 5)).cwiseAbs().maxCoeff() < 5.0 / std::sqrt(4000.0));
}

TEST_CASE("structural invariants: Hermitian PSD G and L, Hermitian H, zero constant variance") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto b = random_batched(400, 2 + trial % 3, gen);
    StateMatrix c(8, 1);
    for (Index i = 0; i < 8; ++i) c(i, 0) = (i + 0.5) / 8;
    const auto d = laplacian_rbf_dictionary(c);
    const auto m = assemble_batched(b, d);
    CHECK(m.G == MatrixXc(m.G.adjoint()));
    CHECK(m.L == MatrixXc(m.L.adjoint()));
    CHECK(*m.H == MatrixXc(m.H->adjoint()));
    CHECK(min_eig(m.G) >= -1e-12 * m.G.norm());
    CHECK(min_eig(m.L) >= -1e-12 * m.L.norm());
  }
  CircleMapConfig cfg;
  cfg.seed = 1;
  const auto m = assemble_batched(generate_circle_batched(cfg, 50, 200), fourier_dictionary(3));
  const VectorXc e0 = VectorXc::Unit(7, 3);  // constant function
  CHECK(std::abs(e0.dot((m.L - *m.H) * e0)) < 1e-12);
}

TEST_CASE("permutation of rows leaves matrices unchanged to machine precision") {
  std::mt19937_64 gen(6);
  const auto s = testing::random_snapshots(5000, gen);
  std::vector<Index> perm(5000);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), gen);
  StateMatrix x(5000, 1), y(5000, 1);
  VectorXd w(5000);
  for (Index i = 0; i < 5000; ++i) {
    x.row(i) = s.states_x().row(perm[i]);
    y.row(i) = s.states_y().row(perm[i]);
    w[i] = s.weights()[perm[i]];
  }
  AssemblyOptions o;
  o.chunk_samples = 128;
  const auto a = assemble_unbatched(s, fourier_dictionary(5), o);
  const auto b = assemble_unbatched(SnapshotSet(x, y, w), fourier_dictionary(5), o);
  CHECK(rel(a.G, b.G) < 1e-14);
  CHECK(rel(a.A, b.A) < 1e-14);
  CHECK(rel(a.L, b.L) < 1e-14);
}

TEST_CASE("thread count does not change a single bit") {
  std::mt19937_64 gen(7);
  const auto b = random_batched(20000, 3, gen);
  AssemblyOptions one, four;
  one.chunk_samples = four.chunk_samples = 1000;
  four.threads = 4;
  const auto m1 = assemble_batched(b, fourier_dictionary(4), one);
  const auto m4 = assemble_batched(b, fourier_dictionary(4), four);
  CHECK(m1.G == m4.G);
  CHECK(m1.A == m4.A);
  CHECK(m1.L == m4.L);
  CHECK(*m1.H == *m4.H);
}

TEST_CASE("estimation_error") {
  std::mt19937_64 gen(8);
  KoopmanMatrices est;
  est.G = testing::random_matrix(4, 4, gen);
  est.A = testing::random_matrix(4, 4, gen);
  est.L = testing::random_matrix(4, 4, gen);
  est.H = testing::random_matrix(4, 4, gen);
  const auto zero = estimation_error(est, est);
  CHECK(zero.A == 0.0);
  CHECK(zero.G == 0.0);
  CHECK(zero.L == 0.0);
  CHECK(*zero.H == 0.0);

  KoopmanMatrices ref = est;
  MatrixXc e = MatrixXc::Zero(4, 4);
  e(0, 1) = cdouble(3, 0);
  e(2, 3) = cdouble(0, 4);
  ref.A += e;
  CHECK(estimation_error(est, ref).A == doctest::Approx(5.0));
  ref.L = testing::random_matrix(3, 3, gen);
  CHECK_THROWS_AS(estimation_error(est, ref), DomainError);
}

TEST_CASE("binary container and CSV export round-trip") {
  std::mt19937_64 gen(9);
  const auto b = random_batched(100, 2, gen);
  auto m = assemble_batched(b, fourier_dictionary(2));
  const auto dir = testing::temp_dir("matrices");
  write_matrices(dir / "m.bin", m);
  const auto r = read_matrices(dir / "m.bin");
  CHECK(r.G == m.G);
  CHECK(r.A == m.A);
  CHECK(r.L == m.L);
  CHECK(*r.H == *m.H);
  CHECK(r.meta.labels == m.meta.labels);
  CHECK(r.meta.estimator == "batched-pair");
  CHECK(std::filesystem::file_size(dir / "m.bin") == 8 + 4 + 4 + 8 + 4 * 25 * 16);

  m.H.reset();
  write_matrices(dir / "u.bin", m);
  CHECK_FALSE(read_matrices(dir / "u.bin").has_H());
  std::ofstream(dir / "junk.bin") << "not a matrix";
  CHECK_THROWS_AS(read_matrices(dir / "junk.bin"), SchemaError);

  write_matrix_csv(dir / "g.csv", m.G);
  std::ifstream in(dir / "g.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "i,j,re,im");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 25);
}

TEST_CASE("matrices cast to single precision") {
  std::mt19937_64 gen(10);
  const auto b = random_batched(100, 2, gen);
  const auto m = assemble_batched(b, fourier_dictionary(2));
  const auto f = m.cast<float>();
  CHECK(f.has_H());
  CHECK((f.A.cast<cdouble>() - m.A).norm() < 1e-5 * m.A.norm());
  CHECK_THROWS_AS(KoopmanMatrices{}.require_H("res"), CapabilityError);
}
