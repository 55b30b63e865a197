#include "sresdmd/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "sresdmd/csv.hpp"
#include "sresdmd/errors.hpp"
#include "sresdmd/parallel.hpp"
#include "sresdmd/rng.hpp"

namespace sresdmd {

Dictionary::Dictionary(Index dim, Evaluator evaluator, VectorXd lipschitz, VectorXd sup_norms,
                       std::vector<std::string> labels, std::string description)
    : dim_(dim),
      eval_(std::move(evaluator)),
      lipschitz_(std::move(lipschitz)),
      sup_norms_(std::move(sup_norms)),
      labels_(std::move(labels)),
      description_(std::move(description)) {
  if (lipschitz_.size() < 1) throw DomainError("dictionary needs at least one function");
  if (sup_norms_.size() != lipschitz_.size() || static_cast<Index>(labels_.size()) != lipschitz_.size())
    throw DomainError("dictionary constant vectors must have length N");
  if (dim_ < 1) throw DomainError("dictionary domain dimension must be >= 1");
  for (Index k = 0; k < lipschitz_.size(); ++k)
    if (!(lipschitz_[k] >= 0) || !(sup_norms_[k] >= 0))
      throw DomainError("dictionary constants must be nonnegative");
}

VectorXc Dictionary::operator()(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  if (x.size() != dim_) throw DomainError("point dimension does not match dictionary");
  const Eigen::RowVectorXd xs = x;
  VectorXc out(size());
  eval_(xs.data(), out.data(), 1);
  return out;
}

Dictionary fourier_dictionary(int n, double period) {
  if (n < 0) throw DomainError("fourier_dictionary: n must be >= 0");
  if (!(period > 0)) throw DomainError("fourier_dictionary: period must be > 0");
  const Index size = 2 * n + 1;
  VectorXd lip(size), sup = VectorXd::Ones(size);
  std::vector<std::string> labels;
  for (int j = -n; j <= n; ++j) {
    lip[j + n] = 2 * std::numbers::pi * std::abs(j) / period;
    labels.push_back("fourier[" + std::to_string(j) + "]");
  }
  auto eval = [n, period](const double* x, cdouble* out, Index stride) {
    const double theta = 2 * std::numbers::pi * x[0] / period;
    for (int j = -n; j <= n; ++j) out[(j + n) * stride] = std::polar(1.0, j * theta);
  };
  std::ostringstream desc;
  desc << "fourier(n=" << n << ",period=" << csv::format(period) << ")";
  return Dictionary(1, eval, std::move(lip), std::move(sup), std::move(labels), desc.str());
}

double median_pairwise_distance(const StateMatrix& points) {
  const Index n = points.rows();
  if (n < 2) throw DomainError("median_pairwise_distance needs at least two points");
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) dist.push_back((points.row(i) - points.row(j)).norm());
  const auto mid = dist.begin() + dist.size() / 2;
  std::nth_element(dist.begin(), mid, dist.end());
  if (dist.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(dist.begin(), mid);
  return 0.5 * (lower + upper);
}

Dictionary laplacian_rbf_dictionary(const StateMatrix& centers, std::optional<double> scale) {
  const Index n = centers.rows(), d = centers.cols();
  if (n < 1 || d < 1) throw DomainError("laplacian_rbf_dictionary: need at least one center");
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if ((centers.row(i) - centers.row(j)).squaredNorm() == 0.0)
        throw DomainError("laplacian_rbf_dictionary: duplicate centers " + std::to_string(i) +
                          " and " + std::to_string(j) + " make the Gram matrix singular");
  const double s = scale ? *scale : (n >= 2 ? median_pairwise_distance(centers) : 1.0);
  if (!(s > 0) || !std::isfinite(s)) throw DomainError("laplacian_rbf_dictionary: scale must be > 0");

  std::vector<std::string> labels;
  for (Index k = 0; k < n; ++k) labels.push_back("rbf[" + std::to_string(k) + "]");
  auto eval = [centers, s, n, d](const double* x, cdouble* out, Index stride) {
    for (Index k = 0; k < n; ++k) {
      double r2 = 0;
      for (Index c = 0; c < d; ++c) {
        const double diff = x[c] - centers(k, c);
        r2 += diff * diff;
      }
      out[k * stride] = std::exp(-std::sqrt(r2) / s);
    }
  };
  std::ostringstream desc;
  desc << "laplacian_rbf(N=" << n << ",scale=" << csv::format(s) << ")";
  return Dictionary(d, eval, VectorXd::Constant(n, 1.0 / s), VectorXd::Ones(n), std::move(labels),
                    desc.str());
}

StateMatrix pick_centers(const StateMatrix& trajectory, Index count, std::uint64_t seed) {
  const Index m = trajectory.rows();
  if (count < 1) throw DomainError("pick_centers: count must be >= 1");
  if (m < count) throw DomainError("pick_centers: trajectory has fewer rows than requested centers");
  CounterRng rng(seed, stream_id("pick_centers"));

  std::vector<Index> chosen{0};
  VectorXd mind = (trajectory.rowwise() - trajectory.row(0)).rowwise().norm();
  std::vector<Index> ties;
  while (static_cast<Index>(chosen.size()) < count) {
    const double best = mind.maxCoeff();
    if (!(best > 0)) throw DomainError("pick_centers: not enough distinct rows");
    ties.clear();
    for (Index r = 0; r < m; ++r)
      if (mind[r] == best) ties.push_back(r);
    Index next = ties.front();
    if (ties.size() > 1)
      next = ties[static_cast<std::size_t>(rng.uniform() * static_cast<double>(ties.size()))];
    chosen.push_back(next);
    mind = mind.cwiseMin((trajectory.rowwise() - trajectory.row(next)).rowwise().norm());
  }
  StateMatrix out(count, trajectory.cols());
  for (Index i = 0; i < count; ++i) out.row(i) = trajectory.row(chosen[i]);
  return out;
}

MatrixXc evaluate_matrix(const Dictionary& dict, const Eigen::Ref<const StateMatrix>& points,
                         unsigned threads) {
  if (points.cols() != dict.dim()) throw DomainError("evaluate_matrix: dimension mismatch");
  const Index m = points.rows();
  MatrixXc out(m, dict.size());
  constexpr Index block = 1024;
  const std::size_t blocks = static_cast<std::size_t>((m + block - 1) / block);
  parallel_for(blocks, threads, [&](std::size_t b) {
    const Index r1 = std::min<Index>(m, (static_cast<Index>(b) + 1) * block);
    for (Index r = static_cast<Index>(b) * block; r < r1; ++r)
      dict.evaluate_into(points.row(r).data(), out.data() + r, m);
  });
  return out;
}

}  // namespace sresdmd
