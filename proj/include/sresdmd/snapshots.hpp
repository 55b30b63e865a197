#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "sresdmd/types.hpp"

namespace sresdmd {

/// Snapshot pairs (x, y) with quadrature weights. Immutable once built.
class SnapshotSet {
 public:
  SnapshotSet(StateMatrix states_x, StateMatrix states_y, VectorXd weights);

  const StateMatrix& states_x() const { return x_; }
  const StateMatrix& states_y() const { return y_; }
  const VectorXd& weights() const { return w_; }
  Index size() const { return x_.rows(); }
  Index dim() const { return x_.cols(); }

 private:
  StateMatrix x_, y_;
  VectorXd w_;
};

/// M1 initial states, each with M2 independent one-step images.
class BatchedSnapshotSet {
 public:
  BatchedSnapshotSet(StateMatrix states_x, std::vector<StateMatrix> realizations,
                     VectorXd weights);

  const StateMatrix& states_x() const { return x_; }
  const std::vector<StateMatrix>& realizations() const { return ys_; }
  const StateMatrix& realization(std::size_t k) const { return ys_[k]; }
  const VectorXd& weights() const { return w_; }
  Index batches() const { return x_.rows(); }
  Index realization_count() const { return static_cast<Index>(ys_.size()); }
  Index dim() const { return x_.cols(); }

 private:
  StateMatrix x_;
  std::vector<StateMatrix> ys_;
  VectorXd w_;
};

struct BinningSpec {
  enum class Mode { grid, nearest_centroid, exact };
  Mode mode = Mode::grid;
  std::vector<int> bins_per_dim;  // grid mode
  StateMatrix centroids;          // nearest_centroid mode
  int min_occupancy = 2;
};

// Parses "grid:10x10:2", "centroid:<csv>:2" or "exact:2" (trailing
// min_occupancy optional, default 2).
BinningSpec parse_binning_spec(const std::string& text);

struct SnapshotSchema {
  std::string x_prefix = "x";
  std::string y_prefix = "y";
  std::string weight_column = "w";
  std::string batch_column = "batch";
};

VectorXd monte_carlo_weights(Index count);
VectorXd periodic_trapezoid_weights(Index count, double domain_length);

/// Reads an unbatched snapshot CSV. A file carrying a batch column must be
/// read with load_batched_snapshots instead.
SnapshotSet load_snapshots(const std::filesystem::path& path, const SnapshotSchema& schema = {});
/// Reads a CSV with a batch column. Rows are grouped by (batch, x); the weight
/// column holds the batch weight and must agree within a batch. Ragged groups
/// are truncated to the smallest group size.
BatchedSnapshotSet load_batched_snapshots(const std::filesystem::path& path,
                                          const SnapshotSchema& schema = {});
/// Dispatches on the presence of the batch column.
std::variant<SnapshotSet, BatchedSnapshotSet> load_snapshot_file(
    const std::filesystem::path& path, const SnapshotSchema& schema = {});

void write_snapshots(const std::filesystem::path& path, const SnapshotSet& data);
void write_batched_snapshots(const std::filesystem::path& path, const BatchedSnapshotSet& data);

/// One row per (batch, realization); each row carries weight w / M2.
SnapshotSet flatten(const BatchedSnapshotSet& data);

BatchedSnapshotSet bin_to_batched(const SnapshotSet& data, const BinningSpec& spec);

}  // namespace sresdmd
