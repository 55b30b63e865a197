#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sresdmd/snapshots.hpp"
#include "sresdmd/spectral.hpp"
#include "sresdmd/systems.hpp"

namespace sresdmd {

struct FileSystemConfig {
  std::filesystem::path path;
};

struct FourierSpec {
  int n = 10;
  double period = 1.0;
};

struct RbfSpec {
  Index centers = 100;
  std::optional<double> scale;
  std::optional<std::filesystem::path> centers_file;
};

struct GridSpec {
  enum class Kind { default_lattice, rectangle } kind = Kind::default_lattice;
  int N = 2;
  double re_min = -1.2, re_max = 1.2, im_min = -1.2, im_max = 1.2;
  int re_steps = 41, im_steps = 41;
};

struct ForecastSpec {
  int horizons = 10;
  std::optional<double> norm_K;  // estimated from the data when absent
  // Observable: a dictionary element, or a state coordinate projected onto the
  // dictionary span by weighted least squares.
  enum class Observable { dictionary, state } observable = Observable::dictionary;
  Index index = 0;
  std::optional<double> delta_G, delta_A;  // analytic for the circle map when absent
};

struct BoundsSpec {
  std::vector<double> M = {1e2, 1e3, 1e4, 1e5, 1e6};
  std::vector<double> t = {0.1};
  std::optional<double> upsilon;  // estimated for the circle map when absent
  std::optional<double> c;        // Lipschitz constant of F in (x, tau)
  Index upsilon_samples = 100000;
};

/// Parsed run configuration. Every stochastic stage draws from labeled
/// substreams of `seed`.
struct RunConfig {
  std::optional<std::uint64_t> seed;
  std::variant<CircleMapConfig, VdpConfig, FileSystemConfig> system;
  Index M1 = 100;
  Index M2 = 2;
  std::variant<FourierSpec, RbfSpec> dictionary;
  std::optional<std::string> binning;
  RegularizationPolicy regularization;
  GridSpec grid;
  double epsilon = 0.1;
  ForecastSpec forecast;
  BoundsSpec bounds;
  std::string text;  // raw config bytes, hashed into the manifest
};

/// Throws ConfigError on any malformed or missing field.
RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

struct RunOptions {
  std::filesystem::path out_dir = "out";
  unsigned threads = 1;
  std::optional<std::string> bin;  // overrides the config's binning spec
};

void cmd_simulate(const RunConfig& cfg, const RunOptions& opts);
void cmd_matrices(const RunConfig& cfg, const RunOptions& opts);
void cmd_eigs(const RunConfig& cfg, const RunOptions& opts);
void cmd_pseudospec(const RunConfig& cfg, const RunOptions& opts);
void cmd_var_pseudospec(const RunConfig& cfg, const RunOptions& opts);
void cmd_forecast(const RunConfig& cfg, const RunOptions& opts);
void cmd_bounds(const RunConfig& cfg, const RunOptions& opts);
/// simulate (when needed) then every analysis; bounds are skipped when their
/// constants cannot be resolved.
void cmd_all(const RunConfig& cfg, const RunOptions& opts);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Re-hashes the config and every output listed in <out_dir>/manifest.json.
/// Returns the list of mismatches (empty when everything matches).
std::vector<std::string> verify_manifest(const std::filesystem::path& config_path,
                                         const std::filesystem::path& out_dir);

/// 0 success, 2 config or input error, 3 capability error, 4 numerical failure.
int exit_code_for(const std::exception& e);

}  // namespace sresdmd
