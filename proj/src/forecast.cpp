#include "sresdmd/forecast.hpp"

namespace sresdmd {

double forecast_error_bound(const ForecastBoundInputs& in, int n) {
  if (n < 0) throw DomainError("forecast_error_bound: horizon must be >= 0");
  if (!(in.norm_K >= 0 && in.delta_G >= 0 && in.delta_A >= 0 && in.delta_n >= 0))
    throw DomainError("forecast_error_bound: inputs must be nonnegative");
  if (!(in.norm_K > in.delta_A))
    throw DomainError("forecast_error_bound: need norm_K > delta_A for the geometric sum");
  const double kn = std::pow(in.norm_K, n);
  const double geo = (kn - std::pow(in.delta_A, n)) / (in.norm_K - in.delta_A);
  return geo * in.delta_A * (in.delta_G + 1.0) + kn * in.delta_G + in.delta_n;
}

double chernoff_bound(double variance, double a) {
  if (!(a > 0)) throw DomainError("chernoff_bound: a must be > 0");
  if (!(variance >= 0)) throw DomainError("chernoff_bound: variance must be >= 0");
  return std::min(1.0, variance / (a * a));
}

}  // namespace sresdmd
