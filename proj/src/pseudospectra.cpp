#include "sresdmd/pseudospectra.hpp"

#include <cmath>
#include <sstream>

#include "sresdmd/csv.hpp"

namespace sresdmd {

const char* to_string(ResidualKind kind) {
  return kind == ResidualKind::residual ? "residual" : "variance_residual";
}

ComplexGrid default_grid(int n) {
  if (n < 1) throw DomainError("default_grid: N must be >= 1");
  ComplexGrid grid;
  const long n2 = static_cast<long>(n) * n;
  const long r2 = n2 * n2;  // |a + ib| <= N^2 in lattice units
  for (long b = -n2; b <= n2; ++b)
    for (long a = -n2; a <= n2; ++a)
      if (a * a + b * b <= r2)
        grid.points.emplace_back(static_cast<double>(a) / n, static_cast<double>(b) / n);
  grid.provenance = "default(" + std::to_string(n) + ")";
  return grid;
}

ComplexGrid rectangle_grid(double re_min, double re_max, double im_min, double im_max, int n_re,
                           int n_im) {
  if (n_re < 1 || n_im < 1) throw DomainError("rectangle_grid: step counts must be >= 1");
  if (!(re_max >= re_min) || !(im_max >= im_min)) throw DomainError("rectangle_grid: empty range");
  auto node = [](double lo, double hi, int n, int i) {
    return n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  };
  ComplexGrid grid;
  grid.points.reserve(static_cast<std::size_t>(n_re) * n_im);
  for (int j = 0; j < n_im; ++j)
    for (int i = 0; i < n_re; ++i)
      grid.points.emplace_back(node(re_min, re_max, n_re, i), node(im_min, im_max, n_im, j));
  std::ostringstream p;
  p << "rectangle(" << csv::format(re_min) << "," << csv::format(re_max) << ","
    << csv::format(im_min) << "," << csv::format(im_max) << "," << n_re << "," << n_im << ")";
  grid.provenance = p.str();
  return grid;
}

ComplexGrid explicit_grid(std::vector<cdouble> points) {
  if (points.empty()) throw DomainError("explicit_grid: no points");
  for (const auto& z : points)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
      throw DomainError("explicit_grid: non-finite point");
  return {std::move(points), "explicit"};
}

}  // namespace sresdmd
