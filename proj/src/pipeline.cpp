#include "sresdmd/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include <json.hpp>

#include "sresdmd/bounds.hpp"
#include "sresdmd/csv.hpp"
#include "sresdmd/dictionary.hpp"
#include "sresdmd/forecast.hpp"
#include "sresdmd/matrices.hpp"
#include "sresdmd/pseudospectra.hpp"
#include "sresdmd/reports.hpp"

namespace sresdmd {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Config parsing

class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  // Marks an absent or null key as handled.
  void skip(const char* key) const { seen_.insert(key); }

  const json& at(const char* key) const {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(where_ + "." + key + " is required");
    return j_.at(key);
  }

  double number(const char* key) const {
    const json& v = at(key);
    if (!v.is_number()) throw ConfigError(path(key) + " must be a number");
    return v.get<double>();
  }
  double number(const char* key, double fallback) const { return has(key) ? number(key) : mark(key, fallback); }
  std::optional<double> opt_number(const char* key) const {
    if (!has(key)) return mark(key, std::optional<double>{});
    return number(key);
  }

  long integer(const char* key) const {
    const json& v = at(key);
    if (v.is_number_integer()) return v.get<long>();
    // allow 2e4 style literals when they are exact integers
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d == std::floor(d) && std::abs(d) < 9e15) return static_cast<long>(d);
    }
    throw ConfigError(path(key) + " must be an integer");
  }
  long integer(const char* key, long fallback) const { return has(key) ? integer(key) : mark(key, fallback); }

  std::string string(const char* key) const {
    const json& v = at(key);
    if (!v.is_string()) throw ConfigError(path(key) + " must be a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const char* key) const {
    const json& v = at(key);
    if (!v.is_array() || v.empty()) throw ConfigError(path(key) + " must be a nonempty array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(path(key) + " must contain numbers only");
      out.push_back(e.get<double>());
    }
    return out;
  }

  Reader child(const char* key) const { return Reader(at(key), path(key)); }

  std::string path(const char* key) const { return where_ + "." + key; }

  // Unknown keys are almost always typos; reject them.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
  }

 private:
  template <typename T>
  T mark(const char* key, T v) const {
    seen_.insert(key);
    return v;
  }

  const json& j_;
  std::string where_;
  mutable std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void parse_system(const Reader& r, const std::filesystem::path& base, RunConfig& cfg) {
  const std::string kind = r.string("kind");
  if (kind == "circle") {
    CircleMapConfig c;
    c.c = r.number("c", c.c);
    c.amp = r.number("amp", c.amp);
    c.noise_sigma = r.number("noise_sigma", c.noise_sigma);
    try {
      c.validate();
    } catch (const DomainError& e) {
      throw ConfigError(std::string("system: ") + e.what());
    }
    cfg.system = c;
  } else if (kind == "vdp") {
    VdpConfig v;
    v.mu = r.number("mu", v.mu);
    v.delta = r.number("delta", v.delta);
    v.em_step = r.number("em_step", v.em_step);
    v.koopman_dt = r.number("koopman_dt", v.koopman_dt);
    if (r.has("burn_in")) v.burn_in = r.integer("burn_in");
    else r.skip("burn_in");
    try {
      v.validate();
    } catch (const DomainError& e) {
      throw ConfigError(std::string("system: ") + e.what());
    }
    cfg.system = v;
  } else if (kind == "file") {
    FileSystemConfig f{resolve(base, r.string("path"))};
    if (!std::filesystem::exists(f.path)) throw ConfigError("system.path: file not found: " + f.path.string());
    cfg.system = f;
  } else {
    throw ConfigError("system.kind must be circle, vdp or file");
  }
  r.finish();
}

void parse_dictionary(const Reader& r, const std::filesystem::path& base, RunConfig& cfg) {
  const std::string kind = r.string("kind");
  if (kind == "fourier") {
    FourierSpec f;
    f.n = static_cast<int>(r.integer("n", f.n));
    f.period = r.number("period", f.period);
    if (f.n < 0 || !(f.period > 0)) throw ConfigError("dictionary: need n >= 0 and period > 0");
    cfg.dictionary = f;
  } else if (kind == "rbf") {
    RbfSpec s;
    s.centers = r.integer("centers", s.centers);
    s.scale = r.opt_number("scale");
    if (r.has("centers_file")) {
      s.centers_file = resolve(base, r.string("centers_file"));
      if (!std::filesystem::exists(*s.centers_file))
        throw ConfigError("dictionary.centers_file: file not found: " + s.centers_file->string());
    } else {
      r.skip("centers_file");
    }
    if (s.centers < 1) throw ConfigError("dictionary.centers must be >= 1");
    if (s.scale && !(*s.scale > 0)) throw ConfigError("dictionary.scale must be > 0");
    cfg.dictionary = s;
  } else {
    throw ConfigError("dictionary.kind must be fourier or rbf");
  }
  r.finish();
}

void parse_analysis(const Reader& r, RunConfig& cfg) {
  cfg.regularization.rel_cutoff = r.number("rel_cutoff", cfg.regularization.rel_cutoff);
  try {
    cfg.regularization.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("analysis: ") + e.what());
  }
  cfg.epsilon = r.number("epsilon", cfg.epsilon);
  if (!(cfg.epsilon > 0)) throw ConfigError("analysis.epsilon must be > 0");

  if (r.has("grid")) {
    const Reader g = r.child("grid");
    const std::string kind = g.string("kind");
    if (kind == "default") {
      cfg.grid.kind = GridSpec::Kind::default_lattice;
      cfg.grid.N = static_cast<int>(g.integer("N", cfg.grid.N));
      if (cfg.grid.N < 1) throw ConfigError("analysis.grid.N must be >= 1");
    } else if (kind == "rectangle") {
      cfg.grid.kind = GridSpec::Kind::rectangle;
      const auto re = g.numbers("re"), im = g.numbers("im");
      const auto steps = g.numbers("steps");
      if (re.size() != 2 || im.size() != 2 || steps.size() != 2)
        throw ConfigError("analysis.grid: re, im and steps take two values each");
      cfg.grid.re_min = re[0];
      cfg.grid.re_max = re[1];
      cfg.grid.im_min = im[0];
      cfg.grid.im_max = im[1];
      cfg.grid.re_steps = static_cast<int>(steps[0]);
      cfg.grid.im_steps = static_cast<int>(steps[1]);
      if (cfg.grid.re_steps < 1 || cfg.grid.im_steps < 1 || re[1] < re[0] || im[1] < im[0])
        throw ConfigError("analysis.grid: empty rectangle");
    } else {
      throw ConfigError("analysis.grid.kind must be default or rectangle");
    }
    g.finish();
  } else {
    r.skip("grid");
  }

  if (r.has("forecast")) {
    const Reader f = r.child("forecast");
    auto& fc = cfg.forecast;
    fc.horizons = static_cast<int>(f.integer("horizons", fc.horizons));
    if (fc.horizons < 0) throw ConfigError("analysis.forecast.horizons must be >= 0");
    fc.norm_K = f.opt_number("norm_K");
    fc.delta_G = f.opt_number("delta_G");
    fc.delta_A = f.opt_number("delta_A");
    if (f.has("observable")) {
      const Reader o = f.child("observable");
      const std::string kind = o.string("kind");
      if (kind == "dictionary") {
        fc.observable = ForecastSpec::Observable::dictionary;
        fc.index = o.integer("index", 0);
      } else if (kind == "state") {
        fc.observable = ForecastSpec::Observable::state;
        fc.index = o.integer("component", 0);
      } else {
        throw ConfigError("analysis.forecast.observable.kind must be dictionary or state");
      }
      if (fc.index < 0) throw ConfigError("analysis.forecast.observable index must be >= 0");
      o.finish();
    } else {
      f.skip("observable");
    }
    f.finish();
  } else {
    r.skip("forecast");
  }

  if (r.has("bounds")) {
    const Reader b = r.child("bounds");
    auto& bs = cfg.bounds;
    if (b.has("M")) bs.M = b.numbers("M");
    else b.skip("M");
    if (b.has("t")) bs.t = b.numbers("t");
    else b.skip("t");
    bs.upsilon = b.opt_number("upsilon");
    bs.c = b.opt_number("c");
    bs.upsilon_samples = b.integer("upsilon_samples", bs.upsilon_samples);
    for (double m : bs.M)
      if (!(m > 0)) throw ConfigError("analysis.bounds.M entries must be > 0");
    for (double t : bs.t)
      if (!(t > 0)) throw ConfigError("analysis.bounds.t entries must be > 0");
    if ((bs.upsilon && !(*bs.upsilon > 0)) || (bs.c && !(*bs.c > 0)))
      throw ConfigError("analysis.bounds: upsilon and c must be > 0");
    if (bs.upsilon_samples < 2) throw ConfigError("analysis.bounds.upsilon_samples must be >= 2");
    b.finish();
  } else {
    r.skip("bounds");
  }
  r.finish();
}

// ---------------------------------------------------------------------------
// Shared pipeline state

std::uint64_t require_seed(const RunConfig& cfg, const char* stage) {
  if (!cfg.seed) throw ConfigError(std::string("seed is required for the ") + stage + " stage");
  return *cfg.seed;
}

bool simulable(const RunConfig& cfg) { return !std::holds_alternative<FileSystemConfig>(cfg.system); }

std::filesystem::path snapshot_path(const RunConfig& cfg, const RunOptions& opts) {
  if (const auto* f = std::get_if<FileSystemConfig>(&cfg.system)) return f->path;
  return opts.out_dir / "snapshots.csv";
}

void ensure_out_dir(const RunOptions& opts) {
  std::error_code ec;
  std::filesystem::create_directories(opts.out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + opts.out_dir.string() + ": " + ec.message());
}

// Manifest: config hash plus a hash per output. Entries from earlier commands
// are kept while the config hash is unchanged.
class Manifest {
 public:
  Manifest(const RunConfig& cfg, const RunOptions& opts) : cfg_(cfg), opts_(opts) {}

  void output(const std::string& name) { outputs_.push_back(name); }
  void skipped(const std::string& what, const std::string& why) { skipped_[what] = why; }

  void write() const {
    const auto path = opts_.out_dir / "manifest.json";
    const std::string config_hash = sha256_hex(cfg_.text);
    ojson m;
    std::map<std::string, std::string> files;
    std::map<std::string, std::string> skipped;
    if (std::filesystem::exists(path)) {
      try {
        std::ifstream in(path);
        const json old = json::parse(in);
        if (old.value("config_sha256", "") == config_hash) {
          for (auto& [k, v] : old.at("outputs").items()) files[k] = v.get<std::string>();
          if (old.contains("skipped"))
            for (auto& [k, v] : old.at("skipped").items()) skipped[k] = v.get<std::string>();
        }
      } catch (const std::exception&) {
        // unreadable manifest: start over
      }
    }
    for (const auto& name : outputs_) {
      files[name] = sha256_file(opts_.out_dir / name);
      skipped.erase(name);
    }
    for (const auto& [k, v] : skipped_) skipped[k] = v;
    m["tool"] = "sresdmd";
    m["version"] = kVersion;
    m["config_sha256"] = config_hash;
    if (cfg_.seed) m["seed"] = *cfg_.seed;
    else m["seed"] = nullptr;
    m["streams"] = {"simulate", "batch", "pick_centers", "bounds"};
    m["outputs"] = files;
    if (!skipped.empty()) m["skipped"] = skipped;
    std::ofstream out(path, std::ios::binary);
    out << m.dump(2) << '\n';
    if (!out) throw Error("cannot write " + path.string());
  }

 private:
  const RunConfig& cfg_;
  const RunOptions& opts_;
  std::vector<std::string> outputs_;
  std::map<std::string, std::string> skipped_;
};

struct Prepared {
  std::variant<SnapshotSet, BatchedSnapshotSet> data;
  std::optional<Dictionary> dict;
  KoopmanMatrices mats;
};

void simulate_into(const RunConfig& cfg, const RunOptions& opts, Manifest& manifest) {
  if (!simulable(cfg)) throw ConfigError("simulate: system.kind 'file' has nothing to simulate");
  const std::uint64_t seed = require_seed(cfg, "simulate");
  ensure_out_dir(opts);
  ojson prov;
  prov["seed"] = seed;
  prov["M1"] = cfg.M1;
  if (const auto* c = std::get_if<CircleMapConfig>(&cfg.system)) {
    CircleMapConfig cc = *c;
    cc.seed = seed;
    const auto data = generate_circle_batched(cc, cfg.M1, cfg.M2, opts.threads);
    write_batched_snapshots(opts.out_dir / "snapshots.csv", data);
    prov["system"] = {{"kind", "circle"}, {"c", cc.c}, {"amp", cc.amp}, {"noise_sigma", cc.noise_sigma}};
    prov["M2"] = cfg.M2;
    prov["weights"] = "periodic_trapezoid";
    prov["streams"] = {"batch"};
  } else {
    VdpConfig vc = std::get<VdpConfig>(cfg.system);
    vc.seed = seed;
    const auto data = vdp_batched_from_trajectory(vc, cfg.M1, opts.threads);
    write_batched_snapshots(opts.out_dir / "snapshots.csv", data);
    prov["system"] = {{"kind", "vdp"},           {"mu", vc.mu},
                      {"delta", vc.delta},       {"em_step", vc.em_step},
                      {"koopman_dt", vc.koopman_dt}, {"burn_in_steps", vc.burn_in_steps()}};
    prov["M2"] = 2;
    prov["weights"] = "monte_carlo";
    prov["streams"] = {"simulate", "batch"};
  }
  prov["config_sha256"] = sha256_hex(cfg.text);
  std::ofstream out(opts.out_dir / "snapshots.json", std::ios::binary);
  out << prov.dump(2) << '\n';
  manifest.output("snapshots.csv");
  manifest.output("snapshots.json");
}

StateMatrix read_centers_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    std::vector<double> row;
    bool ok = true;
    for (auto f : csv::split(line)) {
      double v;
      if (!csv::parse_double(f, v)) {
        ok = false;
        break;
      }
      row.push_back(v);
    }
    if (!ok) {
      if (lineno == 1) continue;  // header
      throw ParseError("bad center row", lineno);
    }
    if (!rows.empty() && row.size() != rows.front().size()) throw ParseError("ragged center row", lineno);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("no centers", lineno);
  StateMatrix c(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) c(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return c;
}

const StateMatrix& initial_states(const std::variant<SnapshotSet, BatchedSnapshotSet>& data) {
  return std::visit([](const auto& d) -> const StateMatrix& { return d.states_x(); }, data);
}

Dictionary build_dictionary(const RunConfig& cfg, const StateMatrix& states) {
  if (const auto* f = std::get_if<FourierSpec>(&cfg.dictionary)) {
    if (states.cols() != 1) throw ConfigError("fourier dictionary needs one-dimensional states");
    return fourier_dictionary(f->n, f->period);
  }
  const auto& r = std::get<RbfSpec>(cfg.dictionary);
  StateMatrix centers = r.centers_file ? read_centers_csv(*r.centers_file)
                                       : pick_centers(states, r.centers, cfg.seed.value_or(0));
  if (centers.cols() != states.cols()) throw ConfigError("RBF centers dimension does not match the data");
  return laplacian_rbf_dictionary(centers, r.scale);
}

Prepared prepare(const RunConfig& cfg, const RunOptions& opts, Manifest& manifest) {
  const auto path = snapshot_path(cfg, opts);
  if (!std::filesystem::exists(path)) {
    if (!simulable(cfg)) throw ConfigError("snapshot file not found: " + path.string());
    simulate_into(cfg, opts, manifest);
  }
  Prepared p{load_snapshot_file(path), std::nullopt, {}};
  const auto bin = opts.bin ? opts.bin : cfg.binning;
  if (bin) {
    const auto* flat = std::get_if<SnapshotSet>(&p.data);
    if (!flat) throw ConfigError("--bin applies to unbatched snapshots only");
    BinningSpec spec;
    try {
      spec = parse_binning_spec(*bin);
    } catch (const Error& e) {
      throw ConfigError(std::string("bad binning spec: ") + e.what());
    }
    p.data = bin_to_batched(*flat, spec);
  }
  p.dict.emplace(build_dictionary(cfg, initial_states(p.data)));
  AssemblyOptions ao;
  ao.threads = opts.threads;
  if (const auto* b = std::get_if<BatchedSnapshotSet>(&p.data))
    p.mats = assemble_batched(*b, *p.dict, ao);
  else
    p.mats = assemble_unbatched(std::get<SnapshotSet>(p.data), *p.dict, ao);
  return p;
}

// ---------------------------------------------------------------------------
// Analyses on prepared data

void run_matrices(const Prepared& p, const RunOptions& opts, Manifest& manifest) {
  write_matrices(opts.out_dir / "matrices.bin", p.mats);
  manifest.output("matrices.bin");
  manifest.output("matrices.bin.json");
  const std::pair<const char*, const MatrixXc*> named[] = {{"G.csv", &p.mats.G}, {"A.csv", &p.mats.A}, {"L.csv", &p.mats.L}};
  for (const auto& [name, m] : named) {
    write_matrix_csv(opts.out_dir / name, *m);
    manifest.output(name);
  }
  if (p.mats.H) {
    write_matrix_csv(opts.out_dir / "H.csv", *p.mats.H);
    write_matrix_csv(opts.out_dir / "covariance.csv", covariance_matrix(p.mats));
    manifest.output("H.csv");
    manifest.output("covariance.csv");
  }
}

void run_eigs(const RunConfig& cfg, const Prepared& p, const RunOptions& opts, Manifest& manifest) {
  write_eigs_csv(opts.out_dir / "eigs.csv", analyze_eigenpairs(p.mats, cfg.regularization));
  manifest.output("eigs.csv");
}

ComplexGrid make_grid(const GridSpec& g) {
  if (g.kind == GridSpec::Kind::default_lattice) return default_grid(g.N);
  return rectangle_grid(g.re_min, g.re_max, g.im_min, g.im_max, g.re_steps, g.im_steps);
}

void run_pseudospec(const RunConfig& cfg, const Prepared& p, const RunOptions& opts, Manifest& manifest,
                    ResidualKind kind) {
  const auto grid = pseudospectrum(make_grid(cfg.grid), p.mats, cfg.epsilon, kind, cfg.regularization,
                                   opts.threads);
  const std::string name = kind == ResidualKind::residual ? "pseudospec.csv" : "var_pseudospec.csv";
  write_pseudospectrum_csv(opts.out_dir / name, grid, {p.dict->description(), p.dict->size()});
  manifest.output(name);
  manifest.output(name + ".json");
}

bool circle_fourier_reference(const RunConfig& cfg, const FourierSpec** f, const CircleMapConfig** c) {
  *c = std::get_if<CircleMapConfig>(&cfg.system);
  *f = std::get_if<FourierSpec>(&cfg.dictionary);
  return *c && *f && (*f)->period == 1.0;
}

void run_forecast(const RunConfig& cfg, const Prepared& p, const RunOptions& opts, Manifest& manifest) {
  const auto& fc = cfg.forecast;
  p.mats.require_H("forecast (subspace error)");
  const Index n = p.mats.size();
  const MatrixXc k = koopman_matrix(p.mats, cfg.regularization);

  VectorXc g;
  if (fc.observable == ForecastSpec::Observable::dictionary) {
    if (fc.index >= n) throw ConfigError("forecast observable index exceeds the dictionary size");
    g = VectorXc::Unit(n, fc.index);
  } else {
    // Weighted least-squares projection of x_c onto span(psi).
    const StateMatrix& x = initial_states(p.data);
    if (fc.index >= x.cols()) throw ConfigError("forecast state component exceeds the state dimension");
    const VectorXd& w = std::visit([](const auto& d) -> const VectorXd& { return d.weights(); }, p.data);
    const MatrixXc psi = evaluate_matrix(*p.dict, x, opts.threads);
    const VectorXc rhs = psi.adjoint() * (w.array() * x.col(fc.index).array()).matrix().cast<cdouble>();
    g = GramFactor<double>(p.mats.G, cfg.regularization).pseudoinverse() * rhs;
  }
  const double gn = std::sqrt(std::max(0.0, std::real(g.dot(p.mats.G * g))));
  if (!(gn > 0)) throw DomainError("forecast observable has zero norm on the data");
  g /= gn;

  const double norm_K = fc.norm_K ? *fc.norm_K : estimate_norm_K(p.mats, cfg.regularization);
  ForecastBoundInputs in;
  in.norm_K = norm_K;
  const FourierSpec* f = nullptr;
  const CircleMapConfig* c = nullptr;
  if ((!fc.delta_G || !fc.delta_A) && circle_fourier_reference(cfg, &f, &c)) {
    const auto d = deltas_from_reference(p.mats, circle_reference_matrices(*c, f->n), norm_K);
    in.delta_G = d.delta_G;
    in.delta_A = d.delta_A;
  }
  if (fc.delta_G) in.delta_G = *fc.delta_G;
  if (fc.delta_A) in.delta_A = *fc.delta_A;

  std::vector<ForecastRow> rows;
  VectorXc v = g;
  for (int h = 0; h <= fc.horizons; ++h) {
    if (h > 0) v = k * v;
    in.delta_n = subspace_error(p.mats, k, g, h, norm_K);
    rows.push_back({h, std::sqrt(std::max(0.0, std::real(v.dot(p.mats.G * v)))),
                    forecast_error_bound(in, h), in.delta_n});
  }
  write_forecast_csv(opts.out_dir / "forecast.csv", rows);
  manifest.output("forecast.csv");
}

void run_bounds(const RunConfig& cfg, const Prepared& p, const RunOptions& opts, Manifest& manifest) {
  const auto& bs = cfg.bounds;
  const auto* circle = std::get_if<CircleMapConfig>(&cfg.system);
  double upsilon, c;
  if (bs.upsilon) {
    upsilon = *bs.upsilon;
  } else if (circle) {
    CircleMapConfig cc = *circle;
    cc.seed = require_seed(cfg, "bounds");
    upsilon = estimate_upsilon(generate_circle_uniform(cc, bs.upsilon_samples, "bounds").kappa);
  } else {
    throw ConfigError("bounds: analysis.bounds.upsilon is required for this system");
  }
  if (bs.c) c = *bs.c;
  else if (circle) c = circle_lipschitz(*circle);
  else throw ConfigError("bounds: analysis.bounds.c is required for this system");

  const auto k = dictionary_constants(*p.dict);
  std::vector<BoundsRow> rows;
  for (double t : bs.t)
    for (double m : bs.M)
      rows.push_back({m, t, concentration_bounds({m, static_cast<long>(p.dict->size()), t, upsilon, c, k.alpha, k.beta})});
  write_bounds_csv(opts.out_dir / "bounds.csv", rows);
  manifest.output("bounds.csv");
}

template <typename Fn>
void with_prepared(const RunConfig& cfg, const RunOptions& opts, Fn&& fn) {
  ensure_out_dir(opts);
  Manifest manifest(cfg, opts);
  const Prepared p = prepare(cfg, opts, manifest);
  fn(p, manifest);
  manifest.write();
}

}  // namespace

// ---------------------------------------------------------------------------

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  cfg.text = text;
  const Reader r(j, "config");
  if (r.has("seed")) {
    const json& s = r.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      throw ConfigError("config.seed must be a nonnegative integer");
    cfg.seed = s.get<std::uint64_t>();
  } else {
    r.skip("seed");
  }
  parse_system(r.child("system"), base_dir, cfg);
  parse_dictionary(r.child("dictionary"), base_dir, cfg);
  if (r.has("sampling")) {
    const Reader s = r.child("sampling");
    cfg.M1 = s.integer("M1", cfg.M1);
    cfg.M2 = s.integer("M2", cfg.M2);
    s.finish();
    if (cfg.M1 < 1 || cfg.M2 < 1) throw ConfigError("sampling: M1 and M2 must be >= 1");
  } else {
    r.skip("sampling");
  }
  if (r.has("binning")) cfg.binning = r.string("binning");
  else r.skip("binning");
  if (r.has("analysis")) parse_analysis(r.child("analysis"), cfg);
  else r.skip("analysis");
  r.finish();
  if (simulable(cfg) && !cfg.seed) throw ConfigError("config.seed is required for simulated systems");
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

void cmd_simulate(const RunConfig& cfg, const RunOptions& opts) {
  Manifest manifest(cfg, opts);
  simulate_into(cfg, opts, manifest);
  manifest.write();
}

void cmd_matrices(const RunConfig& cfg, const RunOptions& opts) {
  with_prepared(cfg, opts, [&](const Prepared& p, Manifest& m) { run_matrices(p, opts, m); });
}

void cmd_eigs(const RunConfig& cfg, const RunOptions& opts) {
  with_prepared(cfg, opts, [&](const Prepared& p, Manifest& m) { run_eigs(cfg, p, opts, m); });
}

void cmd_pseudospec(const RunConfig& cfg, const RunOptions& opts) {
  with_prepared(cfg, opts, [&](const Prepared& p, Manifest& m) {
    run_pseudospec(cfg, p, opts, m, ResidualKind::residual);
  });
}

void cmd_var_pseudospec(const RunConfig& cfg, const RunOptions& opts) {
  with_prepared(cfg, opts, [&](const Prepared& p, Manifest& m) {
    run_pseudospec(cfg, p, opts, m, ResidualKind::variance_residual);
  });
}

void cmd_forecast(const RunConfig& cfg, const RunOptions& opts) {
  with_prepared(cfg, opts, [&](const Prepared& p, Manifest& m) { run_forecast(cfg, p, opts, m); });
}

void cmd_bounds(const RunConfig& cfg, const RunOptions& opts) {
  with_prepared(cfg, opts, [&](const Prepared& p, Manifest& m) { run_bounds(cfg, p, opts, m); });
}

void cmd_all(const RunConfig& cfg, const RunOptions& opts) {
  ensure_out_dir(opts);
  Manifest manifest(cfg, opts);
  if (simulable(cfg)) simulate_into(cfg, opts, manifest);
  const Prepared p = prepare(cfg, opts, manifest);
  run_matrices(p, opts, manifest);
  run_eigs(cfg, p, opts, manifest);
  auto optional_step = [&](const char* name, auto&& fn) {
    try {
      fn();
    } catch (const CapabilityError& e) {
      std::cerr << "skipping " << name << ": " << e.what() << '\n';
      manifest.skipped(name, e.what());
    } catch (const ConfigError& e) {
      std::cerr << "skipping " << name << ": " << e.what() << '\n';
      manifest.skipped(name, e.what());
    }
  };
  optional_step("pseudospec.csv", [&] { run_pseudospec(cfg, p, opts, manifest, ResidualKind::residual); });
  run_pseudospec(cfg, p, opts, manifest, ResidualKind::variance_residual);
  optional_step("forecast.csv", [&] { run_forecast(cfg, p, opts, manifest); });
  optional_step("bounds.csv", [&] { run_bounds(cfg, p, opts, manifest); });
  manifest.write();
}

// ---------------------------------------------------------------------------

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

std::vector<std::string> verify_manifest(const std::filesystem::path& config_path,
                                         const std::filesystem::path& out_dir) {
  std::vector<std::string> bad;
  std::ifstream in(out_dir / "manifest.json");
  if (!in) return {"manifest.json missing"};
  json m;
  try {
    m = json::parse(in);
  } catch (const json::parse_error&) {
    return {"manifest.json unreadable"};
  }
  if (m.value("config_sha256", "") != sha256_file(config_path)) bad.push_back("config");
  if (m.contains("outputs"))
    for (auto& [name, hash] : m.at("outputs").items()) {
      const auto path = out_dir / name;
      if (!std::filesystem::exists(path) || sha256_file(path) != hash.get<std::string>()) bad.push_back(name);
    }
  return bad;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const SchemaError*>(&e))
    return 2;
  if (dynamic_cast<const CapabilityError*>(&e)) return 3;
  if (dynamic_cast<const DomainError*>(&e) || dynamic_cast<const RankError*>(&e) ||
      dynamic_cast<const InstabilityError*>(&e) || dynamic_cast<const EmptyResultError*>(&e))
    return 4;
  return 1;
}

}  // namespace sresdmd
