#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sresdmd/types.hpp"

namespace sresdmd {

/// A finite set of observables psi_1..psi_N on R^d together with the
/// per-function Lipschitz constants and sup-norms used by the concentration
/// bounds.
class Dictionary {
 public:
  // Writes psi_k(x) to out[k * stride] for k = 0..N-1.
  using Evaluator = std::function<void(const double* x, cdouble* out, Index stride)>;

  Dictionary(Index dim, Evaluator evaluator, VectorXd lipschitz, VectorXd sup_norms,
             std::vector<std::string> labels, std::string description);

  Index size() const { return lipschitz_.size(); }
  Index dim() const { return dim_; }
  const VectorXd& lipschitz() const { return lipschitz_; }
  const VectorXd& sup_norms() const { return sup_norms_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& description() const { return description_; }

  VectorXc operator()(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  void evaluate_into(const double* x, cdouble* out, Index stride) const { eval_(x, out, stride); }

 private:
  Index dim_;
  Evaluator eval_;
  VectorXd lipschitz_, sup_norms_;
  std::vector<std::string> labels_;
  std::string description_;
};

/// exp(2 pi i j x / period), j = -n..n in that order.
Dictionary fourier_dictionary(int n, double period = 1.0);

/// exp(-|x - c_k| / scale). Without a scale the median pairwise center
/// distance is used.
Dictionary laplacian_rbf_dictionary(const StateMatrix& centers,
                                    std::optional<double> scale = std::nullopt);

double median_pairwise_distance(const StateMatrix& points);

/// Greedy farthest-point traversal from the first row; exact distance ties are
/// broken by the seeded generator.
StateMatrix pick_centers(const StateMatrix& trajectory, Index count, std::uint64_t seed);

/// Row m is Psi(points.row(m)); rows may be split across threads.
MatrixXc evaluate_matrix(const Dictionary& dict, const Eigen::Ref<const StateMatrix>& points,
                         unsigned threads = 1);

}  // namespace sresdmd
