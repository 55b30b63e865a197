#include "sresdmd/systems.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "sresdmd/errors.hpp"
#include "sresdmd/parallel.hpp"
#include "sresdmd/rng.hpp"

namespace sresdmd {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_unit(double v) {
  double r = v - std::floor(v);
  return r >= 1.0 ? 0.0 : r;  // floor rounding can land exactly on 1
}

// Integer-order Bessel J_n(x) for any sign of n and x.
double bessel_j(int n, double x) {
  const bool odd = (n % 2) != 0;
  double sign = 1.0;
  if (n < 0 && odd) sign = -sign;
  if (x < 0 && odd) sign = -sign;
  return sign * std::cyl_bessel_j(static_cast<double>(std::abs(n)), std::abs(x));
}

}  // namespace

void CircleMapConfig::validate() const {
  if (!(noise_sigma > 0.0 && noise_sigma <= 1.0))
    throw DomainError("circle map: noise_sigma must lie in (0, 1]");
  if (!std::isfinite(c) || !std::isfinite(amp)) throw DomainError("circle map: non-finite parameter");
}

double circle_step(double x, double tau, const CircleMapConfig& cfg) {
  return wrap_unit(x + cfg.c + cfg.amp * std::sin(kTwoPi * x) + tau);
}

cdouble circle_alpha(int j, const CircleMapConfig& cfg) {
  if (j == 0) return 1.0;
  const double s = cfg.noise_sigma;
  const double theta = kTwoPi * j * s;
  // (e^{i theta} - 1) / (i theta), written to avoid cancellation for small theta
  const cdouble phi = std::polar(1.0, theta / 2) * (std::sin(theta / 2) / (theta / 2));
  return std::polar(1.0, kTwoPi * j * cfg.c) * phi;
}

double circle_variance(int j, const CircleMapConfig& cfg) { return 1.0 - std::norm(circle_alpha(j, cfg)); }

KoopmanMatrices circle_reference_matrices(const CircleMapConfig& cfg, int n) {
  cfg.validate();
  if (n < 0) throw DomainError("circle_reference_matrices: n must be >= 0");
  const Index size = 2 * n + 1;
  KoopmanMatrices out;
  out.G = MatrixXc::Identity(size, size);
  out.A.resize(size, size);
  out.L.resize(size, size);
  MatrixXc h(size, size);
  for (Index r = 0; r < size; ++r) {
    const int i = static_cast<int>(r) - n;
    for (Index s = 0; s < size; ++s) {
      const int j = static_cast<int>(s) - n;
      out.A(r, s) = circle_alpha(j, cfg) * bessel_j(i - j, kTwoPi * j * cfg.amp);
      const double jd = bessel_j(i - j, kTwoPi * (j - i) * cfg.amp);
      h(r, s) = circle_alpha(j, cfg) * std::conj(circle_alpha(i, cfg)) * jd;
      out.L(r, s) = circle_alpha(j - i, cfg) * jd;
    }
  }
  out.H = std::move(h);
  out.meta.samples = 0;
  out.meta.realizations = 0;
  out.meta.estimator = "analytic";
  out.meta.dictionary = "fourier(n=" + std::to_string(n) + ",period=1)";
  for (int j = -n; j <= n; ++j) out.meta.labels.push_back("fourier[" + std::to_string(j) + "]");
  return out;
}

BatchedSnapshotSet generate_circle_batched(const CircleMapConfig& cfg, Index m1, Index m2,
                                           unsigned threads) {
  cfg.validate();
  if (m1 < 1 || m2 < 1) throw DomainError("generate_circle_batched: M1 and M2 must be >= 1");
  StateMatrix x(m1, 1);
  for (Index j = 0; j < m1; ++j) x(j, 0) = static_cast<double>(j) / static_cast<double>(m1);
  std::vector<StateMatrix> ys(static_cast<std::size_t>(m2), StateMatrix(m1, 1));
  parallel_for(static_cast<std::size_t>(m2), threads, [&](std::size_t k) {
    const std::uint64_t stream = stream_id("batch", static_cast<std::uint32_t>(k));
    for (Index j = 0; j < m1; ++j) {
      CounterRng rng(cfg.seed, stream, static_cast<std::uint32_t>(j));
      ys[k](j, 0) = circle_step(x(j, 0), cfg.noise_sigma * rng.uniform(), cfg);
    }
  });
  return BatchedSnapshotSet(std::move(x), std::move(ys), periodic_trapezoid_weights(m1, 1.0));
}

CircleSample generate_circle_uniform(const CircleMapConfig& cfg, Index m, std::string_view label) {
  cfg.validate();
  if (m < 1) throw DomainError("generate_circle_uniform: M must be >= 1");
  CounterRng rng(cfg.seed, stream_id(label));
  StateMatrix x(m, 1), y(m, 1), kappa(m, 2);
  for (Index i = 0; i < m; ++i) {
    const double xi = rng.uniform();
    const double tau = cfg.noise_sigma * rng.uniform();
    x(i, 0) = xi;
    y(i, 0) = circle_step(xi, tau, cfg);
    kappa(i, 0) = xi;
    kappa(i, 1) = tau;
  }
  return {SnapshotSet(std::move(x), std::move(y), monte_carlo_weights(m)), std::move(kappa)};
}

double circle_lipschitz(const CircleMapConfig& cfg) {
  return std::hypot(1.0 + kTwoPi * std::abs(cfg.amp), 1.0);
}

// ---------------------------------------------------------------------------

void VdpConfig::validate() const {
  if (!(mu > 0.0)) throw DomainError("vdp: mu must be > 0");
  if (!(delta >= 0.0)) throw DomainError("vdp: delta must be >= 0");
  if (!(em_step > 0.0) || !(koopman_dt > 0.0)) throw DomainError("vdp: step sizes must be > 0");
  steps_per_sample();
  if (burn_in && *burn_in < 0) throw DomainError("vdp: burn_in must be >= 0");
}

long VdpConfig::steps_per_sample() const {
  const double ratio = koopman_dt / em_step;
  const long n = std::lround(ratio);
  if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * ratio)
    throw DomainError("vdp: koopman_dt must be a positive integer multiple of em_step");
  return n;
}

long VdpConfig::burn_in_steps() const {
  if (burn_in) return *burn_in;
  const double omega0 = 1.0 - mu * mu / 16.0;
  return static_cast<long>(std::ceil(50.0 * kTwoPi / omega0 / em_step));
}

Eigen::Vector2d vdp_drift(const Eigen::Vector2d& s, double mu) {
  return {s(1), mu * (1.0 - s(0) * s(0)) * s(1) - s(0)};
}

namespace {

constexpr double kOverflowGuard = 1e6;

void em_steps(const VdpConfig& cfg, Eigen::Vector2d& s, long steps, CounterRng& rng) {
  const double h = cfg.em_step;
  const double kick = std::sqrt(2.0 * cfg.delta * h);
  for (long i = 0; i < steps; ++i) {
    const Eigen::Vector2d f = vdp_drift(s, cfg.mu);
    s(0) += h * f(0);
    s(1) += h * f(1);
    if (cfg.delta > 0.0) s(1) += kick * rng.normal();
  }
  if (!(std::abs(s(0)) < kOverflowGuard && std::abs(s(1)) < kOverflowGuard))
    throw InstabilityError("Euler-Maruyama diverged; reduce em_step");
}

}  // namespace

StateMatrix vdp_em_trajectory(const VdpConfig& cfg, Index n_samples, const Eigen::Vector2d& x0) {
  cfg.validate();
  if (n_samples < 1) throw DomainError("vdp_em_trajectory: need at least one sample");
  CounterRng rng(cfg.seed, stream_id("simulate"));
  Eigen::Vector2d s = x0;
  const long stride = cfg.steps_per_sample();
  long burn = cfg.burn_in_steps();
  while (burn > 0) {  // check the guard regularly during long burn-ins
    const long chunk = std::min(burn, stride);
    em_steps(cfg, s, chunk, rng);
    burn -= chunk;
  }
  StateMatrix out(n_samples, 2);
  for (Index i = 0; i < n_samples; ++i) {
    if (i > 0) em_steps(cfg, s, stride, rng);
    out.row(i) = s.transpose();
  }
  return out;
}

Eigen::Vector2d vdp_evolve(const VdpConfig& cfg, const Eigen::Vector2d& x, std::uint32_t realization,
                           std::uint32_t sample) {
  CounterRng rng(cfg.seed, stream_id("batch", realization), sample);
  Eigen::Vector2d s = x;
  em_steps(cfg, s, cfg.steps_per_sample(), rng);
  return s;
}

BatchedSnapshotSet vdp_batched_from_trajectory(const VdpConfig& cfg, Index m1, unsigned threads) {
  StateMatrix x = vdp_em_trajectory(cfg, m1);
  std::vector<StateMatrix> ys(2, StateMatrix(m1, 2));
  parallel_for(static_cast<std::size_t>(m1), threads, [&](std::size_t m) {
    const Eigen::Vector2d xm = x.row(static_cast<Index>(m)).transpose();
    for (std::uint32_t k = 0; k < 2; ++k)
      ys[k].row(static_cast<Index>(m)) =
          vdp_evolve(cfg, xm, k, static_cast<std::uint32_t>(m)).transpose();
  });
  return BatchedSnapshotSet(std::move(x), std::move(ys), monte_carlo_weights(m1));
}

cdouble vdp_lattice(int m, int k, double mu, double dt) {
  if (m < 0) throw DomainError("vdp_lattice: m must be >= 0");
  const double omega0 = 1.0 - mu * mu / 16.0;
  return std::exp(cdouble(-m * mu * dt, k * omega0 * dt));
}

LatticeMatch nearest_lattice(cdouble lambda, double mu, double dt, int m_max, int k_max) {
  LatticeMatch best;
  best.distance = std::numeric_limits<double>::infinity();
  for (int m = 0; m <= m_max; ++m)
    for (int k = -k_max; k <= k_max; ++k) {
      const cdouble v = vdp_lattice(m, k, mu, dt);
      const double d = std::abs(v - lambda);
      if (d < best.distance) best = {{m, k, v}, d};
    }
  return best;
}

}  // namespace sresdmd
