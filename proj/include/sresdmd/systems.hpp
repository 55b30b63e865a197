#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "sresdmd/matrices.hpp"
#include "sresdmd/snapshots.hpp"
#include "sresdmd/types.hpp"

namespace sresdmd {

// ---------------------------------------------------------------------------
// Noisy circle map F(x, tau) = x + c + amp sin(2 pi x) + tau mod 1,
// tau ~ U[0, noise_sigma].

struct CircleMapConfig {
  double c = 0.2;
  double amp = 0.07957747154594767;  // 1 / (4 pi)
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

double circle_step(double x, double tau, const CircleMapConfig& cfg);

/// E exp(2 pi i j (c + tau)).
cdouble circle_alpha(int j, const CircleMapConfig& cfg);

/// Variance of psi_j o F at any x: 1 - |alpha_j|^2.
double circle_variance(int j, const CircleMapConfig& cfg);

/// Exact G, A, L, H for the Fourier dictionary of order n on [0, 1), from
/// the Jacobi-Anger expansion of exp(i z sin).
KoopmanMatrices circle_reference_matrices(const CircleMapConfig& cfg, int n);

/// M1 equispaced states with trapezoid weights, M2 noise draws each. Draw k of
/// state j comes from stream ("batch", k), substream j.
BatchedSnapshotSet generate_circle_batched(const CircleMapConfig& cfg, Index m1, Index m2,
                                           unsigned threads = 1);

struct CircleSample {
  SnapshotSet snapshots;
  StateMatrix kappa;  // rows (x, tau)
};

/// M i.i.d. uniform states with one noise draw each and weights 1/M, drawn
/// from the stream with the given label.
CircleSample generate_circle_uniform(const CircleMapConfig& cfg, Index m,
                                     std::string_view label = "sample");

/// Lipschitz constant of F in (x, tau) for the Euclidean norm on the pair.
double circle_lipschitz(const CircleMapConfig& cfg);

// ---------------------------------------------------------------------------
// Stochastic Van der Pol oscillator
// dX1 = X2 dt, dX2 = (mu (1 - X1^2) X2 - X1) dt + sqrt(2 delta) dW.

struct VdpConfig {
  double mu = 0.5;
  double delta = 0.02;
  double em_step = 3e-3;
  double koopman_dt = 0.3;
  // Steps discarded before sampling; by default 50 periods of the linearized
  // frequency 1 - mu^2/16.
  std::optional<long> burn_in;
  std::uint64_t seed = 0;

  void validate() const;
  long steps_per_sample() const;
  long burn_in_steps() const;
};

Eigen::Vector2d vdp_drift(const Eigen::Vector2d& state, double mu);

/// Samples every koopman_dt after the burn-in, starting from x0.
StateMatrix vdp_em_trajectory(const VdpConfig& cfg, Index n_samples,
                              const Eigen::Vector2d& x0 = Eigen::Vector2d(1.0, 0.0));

/// Advances one koopman_dt from x with noise from stream ("batch", realization),
/// substream = sample.
Eigen::Vector2d vdp_evolve(const VdpConfig& cfg, const Eigen::Vector2d& x, std::uint32_t realization,
                           std::uint32_t sample);

/// Trajectory samples as initial states, each with two independent one-step
/// evolutions; weights 1/M1.
BatchedSnapshotSet vdp_batched_from_trajectory(const VdpConfig& cfg, Index m1,
                                               unsigned threads = 1);

struct LatticePoint {
  int m = 0;
  int k = 0;
  cdouble value;
};

/// exp((-m mu + i k (1 - mu^2/16)) dt).
cdouble vdp_lattice(int m, int k, double mu, double dt);

struct LatticeMatch {
  LatticePoint point;
  double distance = 0.0;
};

/// Closest lattice point with 0 <= m <= m_max, |k| <= k_max.
LatticeMatch nearest_lattice(cdouble lambda, double mu, double dt, int m_max = 4, int k_max = 8);

}  // namespace sresdmd
