#include "sresdmd/bounds.hpp"

#include <cmath>
#include <limits>

#include "sresdmd/errors.hpp"

namespace sresdmd {

DictionaryConstants dictionary_constants(const Dictionary& dict) {
  if (!dict.lipschitz().allFinite() || !dict.sup_norms().allFinite())
    throw DomainError("dictionary_constants: dictionary has non-finite Lipschitz or sup-norm data");
  return {dict.lipschitz().norm(), dict.sup_norms().norm()};
}

ConcentrationBounds concentration_bounds(const ConcentrationInputs& in) {
  if (!(in.M > 0 && in.t > 0 && in.upsilon > 0 && in.c > 0 && in.alpha > 0 && in.beta > 0) ||
      in.N < 1)
    throw DomainError("concentration_bounds: all inputs must be positive");
  const double lead = 2.0 * std::log(2.0 * static_cast<double>(in.N));
  const double mt2 = in.M * in.t * in.t;
  const double scale = in.upsilon * in.upsilon * in.alpha * in.alpha * in.beta * in.beta;
  auto bound = [&](double denom) { return 1.0 - std::exp(lead - mt2 / denom); };
  ConcentrationBounds b;
  b.p_A = bound(24.0 * scale * (in.c * in.c + 1.0));
  b.p_G = bound(48.0 * scale);
  b.p_L = bound(48.0 * scale * in.c * in.c);
  b.vacuous = b.p_A <= 0 || b.p_G <= 0 || b.p_L <= 0;
  return b;
}

double estimate_upsilon(const StateMatrix& samples, double rel_tol) {
  const Index m = samples.rows();
  if (m < 2) throw DomainError("estimate_upsilon: need at least two samples");
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const VectorXd q = (samples.rowwise() - mean).rowwise().squaredNorm();
  const double m2 = q.mean();
  if (!(m2 > 0)) return 0.0;  // degenerate: kappa is constant
  const double qmax = q.maxCoeff();
  // log f(s) = m2/s^2 + log mean exp(q/s^2), decreasing in s; evaluated with a
  // max shift to avoid overflow for small s.
  auto log_f = [&](double s) {
    const double inv = 1.0 / (s * s);
    const double shift = qmax * inv;
    const double mean_exp = ((q.array() * inv - shift).exp()).mean();
    return m2 * inv + shift + std::log(mean_exp);
  };
  const double target = std::log(2.0);
  double lo = std::sqrt(m2), hi = lo;
  while (log_f(hi) > target) hi *= 2.0;
  while (log_f(lo) <= target) {
    lo *= 0.5;
    if (lo < std::numeric_limits<double>::min()) return 0.0;
  }
  while (hi - lo > rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    (log_f(mid) > target ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace sresdmd
