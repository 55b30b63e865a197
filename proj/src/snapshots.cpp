#include "sresdmd/snapshots.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

#include "sresdmd/csv.hpp"
#include "sresdmd/errors.hpp"

namespace sresdmd {

namespace csv {

std::string format(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view field, double& out) {
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  if (field.empty()) return false;
  auto res = std::from_chars(field.data(), field.data() + field.size(), out);
  return res.ec == std::errc() && res.ptr == field.data() + field.size();
}

bool parse_long(std::string_view field, long& out) {
  if (field.empty()) return false;
  auto res = std::from_chars(field.data(), field.data() + field.size(), out);
  return res.ec == std::errc() && res.ptr == field.data() + field.size();
}

}  // namespace csv

namespace {

void check_weights(const VectorXd& w) {
  bool positive = false;
  for (Index i = 0; i < w.size(); ++i) {
    if (!(w[i] >= 0.0) || !std::isfinite(w[i]))
      throw DomainError("weights must be finite and nonnegative");
    positive = positive || w[i] > 0.0;
  }
  if (!positive) throw DomainError("at least one weight must be positive");
}

}  // namespace

SnapshotSet::SnapshotSet(StateMatrix states_x, StateMatrix states_y, VectorXd weights)
    : x_(std::move(states_x)), y_(std::move(states_y)), w_(std::move(weights)) {
  if (x_.rows() < 1) throw DomainError("snapshot set needs at least one row");
  if (y_.rows() != x_.rows() || w_.size() != x_.rows())
    throw SchemaError("states_x, states_y and weights must have equal row counts");
  if (y_.cols() != x_.cols()) throw SchemaError("states_x and states_y dimension mismatch");
  check_weights(w_);
}

BatchedSnapshotSet::BatchedSnapshotSet(StateMatrix states_x, std::vector<StateMatrix> realizations,
                                       VectorXd weights)
    : x_(std::move(states_x)), ys_(std::move(realizations)), w_(std::move(weights)) {
  if (x_.rows() < 1) throw DomainError("batched set needs at least one batch");
  if (ys_.empty()) throw DomainError("batched set needs at least one realization");
  for (const auto& y : ys_)
    if (y.rows() != x_.rows() || y.cols() != x_.cols())
      throw SchemaError("every realization must have shape M1 x d");
  if (w_.size() != x_.rows()) throw SchemaError("weights length must equal M1");
  check_weights(w_);
}

VectorXd monte_carlo_weights(Index count) {
  if (count < 1) throw DomainError("monte_carlo_weights: M must be >= 1");
  return VectorXd::Constant(count, 1.0 / static_cast<double>(count));
}

VectorXd periodic_trapezoid_weights(Index count, double domain_length) {
  if (count < 1) throw DomainError("periodic_trapezoid_weights: M must be >= 1");
  if (!(domain_length > 0.0)) throw DomainError("periodic_trapezoid_weights: length must be > 0");
  return VectorXd::Constant(count, domain_length / static_cast<double>(count));
}

// ---------------------------------------------------------------------------
// CSV

namespace {

struct ParsedFile {
  Index dim = 0;
  std::vector<double> x, y, w;  // row-major
  std::vector<long> batch;
  bool has_weight = false;
  bool has_batch = false;
  std::vector<long> line_of_row;
};

ParsedFile parse_csv(const std::filesystem::path& path, const SnapshotSchema& schema) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open snapshot file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  const auto header = csv::split(line);

  std::vector<int> xcol, ycol;
  int wcol = -1, bcol = -1;
  auto numbered = [](std::string_view name, const std::string& prefix) -> int {
    if (name.size() <= prefix.size() || name.substr(0, prefix.size()) != prefix) return -1;
    long k;
    if (!csv::parse_long(name.substr(prefix.size()), k) || k < 1) return -1;
    return static_cast<int>(k);
  };
  std::map<int, int> xs, ys;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    const auto name = header[c];
    if (name == schema.weight_column) {
      wcol = c;
    } else if (name == schema.batch_column) {
      bcol = c;
    } else if (int k = numbered(name, schema.x_prefix); k > 0) {
      if (!xs.emplace(k, c).second) throw SchemaError("duplicate column " + std::string(name));
    } else if (int k = numbered(name, schema.y_prefix); k > 0) {
      if (!ys.emplace(k, c).second) throw SchemaError("duplicate column " + std::string(name));
    } else {
      throw SchemaError("unexpected column '" + std::string(name) + "'");
    }
  }
  if (xs.empty()) throw SchemaError("no state columns in header");
  if (xs.size() != ys.size())
    throw SchemaError("x block has d=" + std::to_string(xs.size()) + " but y block has d=" +
                      std::to_string(ys.size()));
  int expect = 1;
  for (auto [k, c] : xs) {
    if (k != expect++) throw SchemaError("x columns must be numbered 1..d");
    xcol.push_back(c);
  }
  expect = 1;
  for (auto [k, c] : ys) {
    if (k != expect++) throw SchemaError("y columns must be numbered 1..d");
    ycol.push_back(c);
  }

  ParsedFile out;
  out.dim = static_cast<Index>(xcol.size());
  out.has_weight = wcol >= 0;
  out.has_batch = bcol >= 0;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const auto fields = csv::split(line);
    if (fields.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       lineno);
    double v;
    for (int c : xcol) {
      if (!csv::parse_double(fields[c], v)) throw ParseError("bad number '" + std::string(fields[c]) + "'", lineno);
      out.x.push_back(v);
    }
    for (int c : ycol) {
      if (!csv::parse_double(fields[c], v)) throw ParseError("bad number '" + std::string(fields[c]) + "'", lineno);
      out.y.push_back(v);
    }
    if (wcol >= 0) {
      if (!csv::parse_double(fields[wcol], v)) throw ParseError("bad weight", lineno);
      out.w.push_back(v);
    }
    if (bcol >= 0) {
      long b;
      if (!csv::parse_long(fields[bcol], b) || b < 0) throw ParseError("bad batch id", lineno);
      out.batch.push_back(b);
    }
    out.line_of_row.push_back(lineno);
  }
  if (out.line_of_row.empty()) throw SchemaError("snapshot file has no data rows");
  return out;
}

StateMatrix rows_to_matrix(const std::vector<double>& flat, Index dim) {
  const Index rows = static_cast<Index>(flat.size()) / dim;
  StateMatrix m(rows, dim);
  std::copy(flat.begin(), flat.end(), m.data());
  return m;
}

}  // namespace

SnapshotSet load_snapshots(const std::filesystem::path& path, const SnapshotSchema& schema) {
  auto p = parse_csv(path, schema);
  if (p.has_batch)
    throw SchemaError("file has a '" + schema.batch_column + "' column; load it as batched data");
  const Index rows = static_cast<Index>(p.line_of_row.size());
  VectorXd w = p.has_weight ? VectorXd(Eigen::Map<const VectorXd>(p.w.data(), rows))
                            : monte_carlo_weights(rows);
  return SnapshotSet(rows_to_matrix(p.x, p.dim), rows_to_matrix(p.y, p.dim), std::move(w));
}

BatchedSnapshotSet load_batched_snapshots(const std::filesystem::path& path,
                                          const SnapshotSchema& schema) {
  auto p = parse_csv(path, schema);
  if (!p.has_batch) throw SchemaError("file has no '" + schema.batch_column + "' column");
  const Index d = p.dim;
  const std::size_t rows = p.line_of_row.size();

  struct Group {
    std::size_t first_row;
    std::vector<std::size_t> members;
  };
  std::map<std::pair<long, std::vector<double>>, std::size_t> index;
  std::vector<Group> groups;
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<double> key(p.x.begin() + r * d, p.x.begin() + (r + 1) * d);
    auto [it, inserted] = index.emplace(std::make_pair(p.batch[r], std::move(key)), groups.size());
    if (inserted) groups.push_back({r, {}});
    Group& g = groups[it->second];
    if (p.has_weight && p.w[r] != p.w[g.first_row])
      throw ParseError("weight differs from the first row of its batch", p.line_of_row[r]);
    g.members.push_back(r);
  }
  std::size_t m2 = groups.front().members.size();
  for (const auto& g : groups) m2 = std::min(m2, g.members.size());

  const Index m1 = static_cast<Index>(groups.size());
  StateMatrix x(m1, d);
  std::vector<StateMatrix> ys(m2, StateMatrix(m1, d));
  VectorXd w(m1);
  for (Index l = 0; l < m1; ++l) {
    const auto& g = groups[l];
    for (Index c = 0; c < d; ++c) x(l, c) = p.x[g.first_row * d + c];
    for (std::size_t k = 0; k < m2; ++k)
      for (Index c = 0; c < d; ++c) ys[k](l, c) = p.y[g.members[k] * d + c];
    w[l] = p.has_weight ? p.w[g.first_row] : 1.0 / static_cast<double>(m1);
  }
  return BatchedSnapshotSet(std::move(x), std::move(ys), std::move(w));
}

std::variant<SnapshotSet, BatchedSnapshotSet> load_snapshot_file(const std::filesystem::path& path,
                                                                 const SnapshotSchema& schema) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open snapshot file " + path.string());
  std::string header;
  std::getline(in, header);
  for (auto name : csv::split(header))
    if (name == schema.batch_column) return load_batched_snapshots(path, schema);
  return load_snapshots(path, schema);
}

namespace {

void write_header(std::ostream& out, Index d, bool batch) {
  for (Index c = 1; c <= d; ++c) out << 'x' << c << ',';
  for (Index c = 1; c <= d; ++c) out << 'y' << c << ',';
  out << 'w';
  if (batch) out << ",batch";
  out << '\n';
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write " + path.string());
  return out;
}

}  // namespace

void write_snapshots(const std::filesystem::path& path, const SnapshotSet& data) {
  auto out = open_out(path);
  const Index d = data.dim();
  write_header(out, d, false);
  std::string row;
  for (Index m = 0; m < data.size(); ++m) {
    row.clear();
    for (Index c = 0; c < d; ++c) (row += csv::format(data.states_x()(m, c))) += ',';
    for (Index c = 0; c < d; ++c) (row += csv::format(data.states_y()(m, c))) += ',';
    row += csv::format(data.weights()[m]);
    out << row << '\n';
  }
}

void write_batched_snapshots(const std::filesystem::path& path, const BatchedSnapshotSet& data) {
  auto out = open_out(path);
  const Index d = data.dim();
  write_header(out, d, true);
  std::string row, prefix;
  for (Index l = 0; l < data.batches(); ++l) {
    prefix.clear();
    for (Index c = 0; c < d; ++c) (prefix += csv::format(data.states_x()(l, c))) += ',';
    const std::string suffix = csv::format(data.weights()[l]) + ',' + std::to_string(l);
    for (const auto& y : data.realizations()) {
      row = prefix;
      for (Index c = 0; c < d; ++c) (row += csv::format(y(l, c))) += ',';
      row += suffix;
      out << row << '\n';
    }
  }
}

SnapshotSet flatten(const BatchedSnapshotSet& data) {
  const Index m1 = data.batches(), m2 = data.realization_count(), d = data.dim();
  StateMatrix x(m1 * m2, d), y(m1 * m2, d);
  VectorXd w(m1 * m2);
  for (Index l = 0; l < m1; ++l)
    for (Index k = 0; k < m2; ++k) {
      const Index r = l * m2 + k;
      x.row(r) = data.states_x().row(l);
      y.row(r) = data.realization(k).row(l);
      w[r] = data.weights()[l] / static_cast<double>(m2);
    }
  return SnapshotSet(std::move(x), std::move(y), std::move(w));
}

// ---------------------------------------------------------------------------
// Binning

BinningSpec parse_binning_spec(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.empty()) throw ConfigError("empty --bin spec");
  BinningSpec spec;
  auto parse_occ = [&](std::size_t i) {
    if (parts.size() > i) {
      long occ;
      if (!csv::parse_long(parts[i], occ)) throw ConfigError("bad min_occupancy in --bin spec");
      spec.min_occupancy = static_cast<int>(occ);
    }
    if (parts.size() > i + 1) throw ConfigError("too many fields in --bin spec");
  };
  if (parts[0] == "grid") {
    spec.mode = BinningSpec::Mode::grid;
    if (parts.size() < 2) throw ConfigError("grid --bin spec needs bin counts, e.g. grid:10x10");
    std::stringstream dims(parts[1]);
    for (std::string n; std::getline(dims, n, 'x');) {
      long k;
      if (!csv::parse_long(n, k)) throw ConfigError("bad bin count '" + n + "'");
      spec.bins_per_dim.push_back(static_cast<int>(k));
    }
    parse_occ(2);
  } else if (parts[0] == "centroid") {
    spec.mode = BinningSpec::Mode::nearest_centroid;
    if (parts.size() < 2) throw ConfigError("centroid --bin spec needs a centroid CSV path");
    std::ifstream in(parts[1]);
    if (!in) throw ConfigError("cannot open centroid file " + parts[1]);
    std::vector<double> flat;
    Index dim = -1;
    long lineno = 0;
    for (std::string line; std::getline(in, line);) {
      ++lineno;
      if (csv::trim(line).empty()) continue;
      auto fields = csv::split(line);
      std::vector<double> row;
      double v;
      for (auto f : fields) {
        if (!csv::parse_double(f, v)) {
          row.clear();
          break;
        }
        row.push_back(v);
      }
      if (row.empty()) {
        if (lineno == 1) continue;  // header
        throw ParseError("bad centroid row", lineno);
      }
      if (dim < 0) dim = static_cast<Index>(row.size());
      if (static_cast<Index>(row.size()) != dim) throw ParseError("ragged centroid row", lineno);
      flat.insert(flat.end(), row.begin(), row.end());
    }
    if (dim < 1) throw ConfigError("centroid file is empty");
    spec.centroids = rows_to_matrix(flat, dim);
    parse_occ(2);
  } else if (parts[0] == "exact") {
    spec.mode = BinningSpec::Mode::exact;
    parse_occ(1);
  } else {
    throw ConfigError("unknown binning mode '" + parts[0] + "'");
  }
  return spec;
}

BatchedSnapshotSet bin_to_batched(const SnapshotSet& data, const BinningSpec& spec) {
  if (spec.min_occupancy < 2) throw DomainError("min_occupancy must be >= 2");
  const Index m = data.size(), d = data.dim();
  const auto& x = data.states_x();

  // Assign every sample a bin key; bins are kept in order of first appearance.
  std::vector<std::size_t> bin_of(m);
  std::vector<std::vector<Index>> members;
  std::vector<Eigen::RowVectorXd> centers;  // grid centers, filled lazily

  switch (spec.mode) {
    case BinningSpec::Mode::grid: {
      if (static_cast<Index>(spec.bins_per_dim.size()) != d)
        throw DomainError("grid binning needs one bin count per dimension");
      for (int n : spec.bins_per_dim)
        if (n < 1) throw DomainError("bin counts must be positive");
      const Eigen::RowVectorXd lo = x.colwise().minCoeff(), hi = x.colwise().maxCoeff();
      std::map<std::vector<long>, std::size_t> index;
      for (Index r = 0; r < m; ++r) {
        std::vector<long> cell(d);
        for (Index c = 0; c < d; ++c) {
          const double span = hi[c] - lo[c];
          long k = span > 0 ? static_cast<long>(std::floor((x(r, c) - lo[c]) / span * spec.bins_per_dim[c])) : 0;
          cell[c] = std::clamp<long>(k, 0, spec.bins_per_dim[c] - 1);
        }
        auto [it, inserted] = index.emplace(cell, members.size());
        if (inserted) {
          members.emplace_back();
          Eigen::RowVectorXd center(d);
          for (Index c = 0; c < d; ++c) {
            const double width = (hi[c] - lo[c]) / spec.bins_per_dim[c];
            center[c] = width > 0 ? lo[c] + (cell[c] + 0.5) * width : lo[c];
          }
          centers.push_back(center);
        }
        members[it->second].push_back(r);
      }
      break;
    }
    case BinningSpec::Mode::nearest_centroid: {
      if (spec.centroids.rows() < 1 || spec.centroids.cols() != d)
        throw DomainError("centroid list must be nonempty with matching dimension");
      std::map<Index, std::size_t> index;
      for (Index r = 0; r < m; ++r) {
        Index best;
        (spec.centroids.rowwise() - x.row(r)).rowwise().squaredNorm().minCoeff(&best);
        auto [it, inserted] = index.emplace(best, members.size());
        if (inserted) members.emplace_back();
        members[it->second].push_back(r);
      }
      break;
    }
    case BinningSpec::Mode::exact: {
      std::map<std::vector<double>, std::size_t> index;
      for (Index r = 0; r < m; ++r) {
        std::vector<double> key(x.row(r).data(), x.row(r).data() + d);
        auto [it, inserted] = index.emplace(std::move(key), members.size());
        if (inserted) members.emplace_back();
        members[it->second].push_back(r);
      }
      break;
    }
  }

  std::vector<std::size_t> kept;
  for (std::size_t b = 0; b < members.size(); ++b)
    if (static_cast<int>(members[b].size()) >= spec.min_occupancy) kept.push_back(b);
  if (kept.empty())
    throw EmptyResultError("no bin reaches min_occupancy=" + std::to_string(spec.min_occupancy));

  std::size_t m2 = members[kept.front()].size();
  for (auto b : kept) m2 = std::min(m2, members[b].size());

  const Index m1 = static_cast<Index>(kept.size());
  StateMatrix bx(m1, d);
  std::vector<StateMatrix> ys(m2, StateMatrix(m1, d));
  VectorXd bw(m1);
  const auto& w = data.weights();
  for (Index l = 0; l < m1; ++l) {
    const auto& mem = members[kept[l]];
    double wsum = 0.0;
    for (Index r : mem) wsum += w[r];
    bw[l] = wsum;
    switch (spec.mode) {
      case BinningSpec::Mode::grid:
        bx.row(l) = centers[kept[l]];
        break;
      case BinningSpec::Mode::nearest_centroid: {
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(d);
        if (wsum > 0) {
          for (Index r : mem) acc += w[r] * x.row(r);
          acc /= wsum;
        } else {
          for (Index r : mem) acc += x.row(r);
          acc /= static_cast<double>(mem.size());
        }
        bx.row(l) = acc;
        break;
      }
      case BinningSpec::Mode::exact:
        bx.row(l) = x.row(mem.front());
        break;
    }
    for (std::size_t k = 0; k < m2; ++k) ys[k].row(l) = data.states_y().row(mem[k]);
  }
  const double total = w.sum();
  const double kept_total = bw.sum();
  if (!(kept_total > 0)) throw EmptyResultError("retained bins carry zero total weight");
  bw *= total / kept_total;
  return BatchedSnapshotSet(std::move(bx), std::move(ys), std::move(bw));
}

}  // namespace sresdmd
