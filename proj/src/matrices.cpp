#include "sresdmd/matrices.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "sresdmd/csv.hpp"
#include "sresdmd/parallel.hpp"

namespace sresdmd {

using Eigen::MatrixXd;

namespace {

struct Partial {
  MatrixXc G, A, L, C;

  Partial& operator+=(const Partial& o) {
    G += o.G;
    A += o.A;
    L += o.L;
    if (C.size()) C += o.C;
    return *this;
  }
};

// Pairwise summation with O(log n) storage: partial k lands at the level of
// the lowest zero bit of k, so the addition tree depends only on item order.
class PairwiseSum {
 public:
  void push(Partial p) {
    std::size_t level = 0;
    while (level < levels_.size() && levels_[level]) {
      Partial merged = std::move(*levels_[level]);
      merged += p;
      p = std::move(merged);
      levels_[level].reset();
      ++level;
    }
    if (level == levels_.size()) levels_.emplace_back();
    levels_[level] = std::move(p);
  }

  Partial finish() {
    std::optional<Partial> acc;
    for (auto it = levels_.rbegin(); it != levels_.rend(); ++it) {
      if (!*it) continue;
      if (!acc)
        acc = std::move(**it);
      else
        *acc += **it;
    }
    return std::move(*acc);
  }

 private:
  std::vector<std::optional<Partial>> levels_;
};

template <typename ItemFn>
Partial reduce_items(std::size_t items, unsigned threads, ItemFn&& fn) {
  PairwiseSum sum;
  threads = std::max(1u, threads);
  std::vector<Partial> wave;
  for (std::size_t start = 0; start < items; start += threads) {
    const std::size_t count = std::min<std::size_t>(threads, items - start);
    wave.assign(count, Partial{});
    parallel_for(count, threads, [&](std::size_t i) { wave[i] = fn(start + i); });
    for (auto& p : wave) sum.push(std::move(p));
  }
  return sum.finish();
}

// Real and imaginary feature planes with one column per sample, so the
// accumulation loops below run over contiguous memory.
struct Planes {
  MatrixXd re, im;
};

Planes feature_planes(const Dictionary& dict, const Eigen::Ref<const StateMatrix>& pts) {
  const MatrixXc psi = evaluate_matrix(dict, pts);
  return {psi.real().transpose(), psi.imag().transpose()};
}

// Accumulates sum_m w_m conj(x_m) y_m^T with entry (i, j) formed as
// w (xr_i yr_j + xi_i yi_j) + i w (xr_i yi_j - xi_i yr_j). Swapping i and j with
// x == y gives the same products, so the result is exactly Hermitian and
// bit-identical to an A built from y == x. Needs -ffp-contract=off.
class ProductSum {
 public:
  ProductSum(Index n, bool hermitian)
      : re_(MatrixXd::Zero(n, n)), im_(MatrixXd::Zero(n, n)), hermitian_(hermitian) {}

  void add(const Planes& x, const Planes& y, const double* w) {
    const Index n = re_.rows(), m = x.re.cols();
    for (Index s = 0; s < m; ++s) {
      const double ws = w[s];
      const double* xr = x.re.col(s).data();
      const double* xi = x.im.col(s).data();
      for (Index j = 0; j < n; ++j) {
        const double a = y.re(j, s), b = y.im(j, s);
        double* rj = re_.col(j).data();
        double* ij = im_.col(j).data();
        const Index top = hermitian_ ? j + 1 : n;
        for (Index i = 0; i < top; ++i) {
          rj[i] += ws * (xr[i] * a + xi[i] * b);
          ij[i] += ws * (xr[i] * b - xi[i] * a);
        }
      }
    }
  }

  MatrixXc result() const {
    const Index n = re_.rows();
    MatrixXc out(n, n);
    out.real() = re_;
    out.imag() = im_;
    if (hermitian_)
      for (Index j = 0; j < n; ++j)
        for (Index i = j + 1; i < n; ++i) out(i, j) = std::conj(out(j, i));
    return out;
  }

 private:
  MatrixXd re_, im_;
  bool hermitian_;
};

MatrixXc weighted_product(const Planes& x, const Planes& y, const double* w, bool hermitian) {
  ProductSum sum(x.re.rows(), hermitian);
  sum.add(x, y, w);
  return sum.result();
}

void check_dims(Index data_dim, const Dictionary& dict) {
  if (data_dim != dict.dim())
    throw DomainError("snapshot dimension " + std::to_string(data_dim) +
                      " does not match dictionary dimension " + std::to_string(dict.dim()));
}

}  // namespace

KoopmanMatrices assemble_unbatched(const SnapshotSet& data, const Dictionary& dict,
                                   const AssemblyOptions& opts) {
  check_dims(data.dim(), dict);
  const Index m = data.size();
  const Index rows = std::max<Index>(1, opts.chunk_samples);
  const std::size_t items = static_cast<std::size_t>((m + rows - 1) / rows);

  Partial total = reduce_items(items, opts.threads, [&](std::size_t item) {
    const Index r0 = static_cast<Index>(item) * rows;
    const Index n = std::min(rows, m - r0);
    const double* w = data.weights().data() + r0;
    const Planes x = feature_planes(dict, data.states_x().middleRows(r0, n));
    const Planes y = feature_planes(dict, data.states_y().middleRows(r0, n));
    Partial p;
    p.G = weighted_product(x, x, w, true);
    p.A = weighted_product(x, y, w, false);
    p.L = weighted_product(y, y, w, true);
    return p;
  });

  KoopmanMatrices out;
  out.G = hermitian_part(total.G);
  out.A = std::move(total.A);
  out.L = hermitian_part(total.L);
  out.meta.samples = m;
  out.meta.realizations = 1;
  out.meta.estimator = "unbatched";
  out.meta.dictionary = dict.description();
  out.meta.labels = dict.labels();
  return out;
}

KoopmanMatrices assemble_batched(const BatchedSnapshotSet& data, const Dictionary& dict,
                                 const AssemblyOptions& opts) {
  check_dims(data.dim(), dict);
  const Index m1 = data.batches();
  const Index m2 = data.realization_count();
  if (m2 < 2) throw DomainError("assemble_batched: need M2 >= 2 realizations, got " + std::to_string(m2));
  const Index chunk = std::max<Index>(1, opts.chunk_samples);
  const Index rows = std::max<Index>(1, chunk / m2);
  const std::size_t items = static_cast<std::size_t>((m1 + rows - 1) / rows);

  Partial total = reduce_items(items, opts.threads, [&](std::size_t item) {
    const Index r0 = static_cast<Index>(item) * rows;
    const Index n = std::min(rows, m1 - r0);
    const double* w = data.weights().data() + r0;
    const Planes x = feature_planes(dict, data.states_x().middleRows(r0, n));
    auto realization = [&](Index k) {
      return feature_planes(dict, data.realization(static_cast<std::size_t>(k)).middleRows(r0, n));
    };
    Partial p;
    p.G = weighted_product(x, x, w, true);
    if (m2 == 2) {
      // Separate products for each term, so identical realizations give
      // L == H bit for bit.
      const Planes y1 = realization(0), y2 = realization(1);
      p.A = weighted_product(x, y1, w, false) + weighted_product(x, y2, w, false);
      p.L = weighted_product(y1, y1, w, true) + weighted_product(y2, y2, w, true);
      p.C = weighted_product(y1, y2, w, false);
      return p;
    }
    // Realizations are stacked kblock at a time; s is the per-sample sum.
    const Index nf = dict.size(), d = data.dim();
    const Index kblock = std::max<Index>(1, chunk / n);
    Planes s{MatrixXd::Zero(nf, n), MatrixXd::Zero(nf, n)};
    ProductSum l(nf, true);
    std::vector<double> ws;
    for (Index k0 = 0; k0 < m2; k0 += kblock) {
      const Index kb = std::min(kblock, m2 - k0);
      StateMatrix pts(kb * n, d);
      ws.resize(static_cast<std::size_t>(kb * n));
      for (Index k = 0; k < kb; ++k) {
        pts.middleRows(k * n, n) = data.realization(static_cast<std::size_t>(k0 + k)).middleRows(r0, n);
        std::copy(w, w + n, ws.begin() + k * n);
      }
      const Planes ys = feature_planes(dict, pts);
      l.add(ys, ys, ws.data());
      for (Index k = 0; k < kb; ++k) {
        s.re += ys.re.middleCols(k * n, n);
        s.im += ys.im.middleCols(k * n, n);
      }
    }
    p.L = l.result();
    p.A = weighted_product(x, s, w, false);
    p.C = weighted_product(s, s, w, true);
    return p;
  });

  const double r = static_cast<double>(m2);
  KoopmanMatrices out;
  out.G = hermitian_part(total.G);
  out.A = total.A / r;
  out.L = hermitian_part(total.L / r);
  if (m2 == 2)
    out.H = hermitian_part(total.C);
  else
    out.H = hermitian_part((total.C - total.L) / (r * (r - 1)));
  out.meta.samples = m1;
  out.meta.realizations = m2;
  out.meta.estimator = m2 == 2 ? "batched-pair" : "batched-all-pairs";
  out.meta.dictionary = dict.description();
  out.meta.labels = dict.labels();
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kMagic[8] = {'S', 'R', 'D', 'M', 'D', 'M', 'A', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "matrix container is written in host order and assumes little-endian");

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw SchemaError("truncated matrix file");
  return v;
}

void put_matrix(std::ostream& out, const MatrixXc& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      put(out, m(i, j).real());
      put(out, m(i, j).imag());
    }
}

MatrixXc get_matrix(std::istream& in, Index n) {
  MatrixXc m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const double re = get<double>(in);
      const double im = get<double>(in);
      m(i, j) = {re, im};
    }
  return m;
}

}  // namespace

void write_matrices(const std::filesystem::path& path, const KoopmanMatrices& mats) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put(out, kVersion);
  const std::uint32_t flags = 0x7u | (mats.H ? 0x8u : 0u);
  put(out, flags);
  put(out, static_cast<std::uint64_t>(mats.size()));
  put_matrix(out, mats.G);
  put_matrix(out, mats.A);
  put_matrix(out, mats.L);
  if (mats.H) put_matrix(out, *mats.H);

  nlohmann::ordered_json meta;
  meta["N"] = mats.size();
  meta["has_H"] = mats.has_H();
  meta["samples"] = mats.meta.samples;
  meta["realizations"] = mats.meta.realizations;
  meta["estimator"] = mats.meta.estimator;
  meta["dictionary"] = mats.meta.dictionary;
  meta["labels"] = mats.meta.labels;
  std::ofstream side(path.string() + ".json");
  side << meta.dump(2) << '\n';
}

KoopmanMatrices read_matrices(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw SchemaError(path.string() + " is not a matrix container");
  if (get<std::uint32_t>(in) != kVersion) throw SchemaError("unsupported matrix container version");
  const auto flags = get<std::uint32_t>(in);
  if ((flags & 0x7u) != 0x7u) throw SchemaError("matrix container lacks G, A or L");
  const auto n = static_cast<Index>(get<std::uint64_t>(in));
  KoopmanMatrices mats;
  mats.G = get_matrix(in, n);
  mats.A = get_matrix(in, n);
  mats.L = get_matrix(in, n);
  if (flags & 0x8u) mats.H = get_matrix(in, n);

  std::ifstream side(path.string() + ".json");
  if (side) {
    const auto meta = nlohmann::json::parse(side);
    mats.meta.samples = meta.value("samples", Index{0});
    mats.meta.realizations = meta.value("realizations", Index{1});
    mats.meta.estimator = meta.value("estimator", std::string{});
    mats.meta.dictionary = meta.value("dictionary", std::string{});
    mats.meta.labels = meta.value("labels", std::vector<std::string>{});
  }
  return mats;
}

void write_matrix_csv(const std::filesystem::path& path, const MatrixXc& m) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write " + path.string());
  out << "i,j,re,im\n";
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      out << i << ',' << j << ',' << csv::format(m(i, j).real()) << ','
          << csv::format(m(i, j).imag()) << '\n';
}

}  // namespace sresdmd
