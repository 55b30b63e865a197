#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "sresdmd/reports.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli() {
  if (const char* p = std::getenv("SRESDMD_CLI")) return p;
  return SRESDMD_CLI;
}

int run(const std::string& args) {
  const std::string cmd = "\"" + cli() + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& body) {
  const auto p = dir / name;
  std::ofstream(p) << body;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

const char* kCircle = R"({
  "seed": 11,
  "system": {"kind": "circle", "c": 0.2, "amp": 0.0, "noise_sigma": 0.5},
  "sampling": {"M1": 32, "M2": 200},
  "dictionary": {"kind": "fourier", "n": 3},
  "analysis": {
    "epsilon": 0.3,
    "grid": {"kind": "rectangle", "re": [-1.2, 1.2], "im": [-1.2, 1.2], "steps": [13, 13]},
    "forecast": {"horizons": 4},
    "bounds": {"M": [1e3, 1e6], "t": [0.5, 1.0]}
  }
})";

}  // namespace

TEST_CASE("full circle run: outputs, determinism and manifest") {
  const auto dir = testing::temp_dir("cli_circle");
  const auto cfg = write_config(dir, "circle.json", kCircle);
  const auto out1 = dir / "run1", out2 = dir / "run2";
  REQUIRE(run("all --config " + cfg.string() + " --out " + out1.string() + " --threads 1") == 0);
  REQUIRE(run("all --config " + cfg.string() + " --out " + out2.string() + " --threads 3") == 0);

  for (const char* f : {"snapshots.csv", "matrices.bin", "G.csv", "A.csv", "L.csv", "H.csv", "covariance.csv",
                        "eigs.csv", "pseudospec.csv", "pseudospec.csv.json", "var_pseudospec.csv",
                        "var_pseudospec.csv.json", "forecast.csv", "bounds.csv", "manifest.json"}) {
    INFO(f);
    REQUIRE(fs::exists(out1 / f));
    CHECK(slurp(out1 / f) == slurp(out2 / f));
  }
  CHECK(line_count(out1 / "snapshots.csv") == 1 + 32 * 200);
  CHECK(line_count(out1 / "eigs.csv") == 1 + 7);
  CHECK(line_count(out1 / "forecast.csv") == 1 + 5);
  CHECK(line_count(out1 / "bounds.csv") == 1 + 4);
  CHECK(run("verify --config " + cfg.string() + " --out " + out1.string()) == 0);

  // the variance-pseudospectrum is smallest next to z = 1
  const auto grid = sresdmd::read_pseudospectrum_csv(out1 / "var_pseudospec.csv");
  REQUIRE(grid.size() == 169);
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (grid[i].r < grid[best].r) best = i;
  double nearest = INFINITY;
  for (const auto& g : grid) nearest = std::min(nearest, std::abs(g.z - sresdmd::cdouble(1)));
  CHECK(std::abs(grid[best].z - sresdmd::cdouble(1)) == doctest::Approx(nearest));

  // a tampered output is detected
  { std::ofstream(out1 / "eigs.csv", std::ios::app) << "0,0,0,,\n"; }
  CHECK(run("verify --config " + cfg.string() + " --out " + out1.string()) == 2);

  // a changed config is detected
  std::string body = kCircle;
  body.replace(body.find("\"seed\": 11"), 10, "\"seed\": 12");
  const auto cfg2 = write_config(dir, "circle2.json", body);
  CHECK(run("verify --config " + cfg2.string() + " --out " + out2.string()) == 2);
}

TEST_CASE("single stages run on their own") {
  const auto dir = testing::temp_dir("cli_stages");
  const auto cfg = write_config(dir, "c.json", kCircle);
  const auto out = dir / "out";
  const std::string base = " --config " + cfg.string() + " --out " + out.string();
  CHECK(run("simulate" + base) == 0);
  CHECK(line_count(out / "snapshots.csv") == 1 + 32 * 200);
  CHECK(run("matrices" + base) == 0);
  CHECK(fs::exists(out / "H.csv"));
  CHECK(run("eigs" + base) == 0);
  CHECK(run("pseudospec" + base) == 0);
  CHECK(run("var-pseudospec" + base) == 0);
  CHECK(run("forecast" + base) == 0);
  CHECK(run("bounds" + base) == 0);
  CHECK(run("verify" + base) == 0);
}

TEST_CASE("configuration errors exit with 2") {
  const auto dir = testing::temp_dir("cli_config");
  const auto out = (dir / "out").string();
  const auto no_seed = write_config(dir, "a.json", R"({
    "system": {"kind": "circle"}, "sampling": {"M1": 8, "M2": 4},
    "dictionary": {"kind": "fourier", "n": 1}})");
  CHECK(run("simulate --config " + no_seed.string() + " --out " + out) == 2);
  const auto unknown = write_config(dir, "b.json", R"({"seed": 1, "bogus": 3,
    "system": {"kind": "circle"}, "sampling": {"M1": 8, "M2": 4},
    "dictionary": {"kind": "fourier", "n": 1}})");
  CHECK(run("simulate --config " + unknown.string() + " --out " + out) == 2);
  const auto broken = write_config(dir, "c.json", "{ not json");
  CHECK(run("simulate --config " + broken.string() + " --out " + out) == 2);
  CHECK(run("simulate --out " + out) == 2);
  CHECK(run("frobnicate") == 2);
}

TEST_CASE("unbatched data: res-based stages report a capability error") {
  const auto dir = testing::temp_dir("cli_unbatched");
  std::mt19937_64 gen(3);
  sresdmd::write_snapshots(dir / "data.csv", testing::random_snapshots(300, gen));
  const auto cfg = write_config(dir, "u.json", R"({
    "system": {"kind": "file", "path": "data.csv"},
    "dictionary": {"kind": "fourier", "n": 2},
    "analysis": {"epsilon": 0.3, "grid": {"kind": "default", "N": 2}, "forecast": {"horizons": 3}}})");
  const std::string base = " --config " + cfg.string() + " --out " + (dir / "out").string();
  CHECK(run("pseudospec" + base) == 3);
  CHECK(run("forecast" + base) == 3);
  CHECK(run("var-pseudospec" + base) == 0);
  CHECK(run("eigs" + base) == 0);
  for (const auto& r : sresdmd::read_eigs_csv(dir / "out" / "eigs.csv")) CHECK_FALSE(r.res.has_value());
  // binning turns the same data into batched data
  CHECK(run("pseudospec" + base + " --bin grid:6:2") == 0);
  // `all` skips what it cannot do and still succeeds
  CHECK(run("all" + base) == 0);
  CHECK(fs::exists(dir / "out" / "var_pseudospec.csv"));
}

TEST_CASE("forecast with norm_K below delta_A is a domain error") {
  const auto dir = testing::temp_dir("cli_domain");
  const auto cfg = write_config(dir, "d.json", R"({
    "seed": 1,
    "system": {"kind": "circle", "amp": 0.0, "noise_sigma": 0.5},
    "sampling": {"M1": 16, "M2": 20},
    "dictionary": {"kind": "fourier", "n": 2},
    "analysis": {"forecast": {"horizons": 3, "norm_K": 0.5, "delta_A": 0.6}}})");
  CHECK(run("forecast --config " + cfg.string() + " --out " + (dir / "out").string()) == 4);
}

TEST_CASE("deterministic Van der Pol simulation has identical realization columns") {
  const auto dir = testing::temp_dir("cli_vdp");
  const auto cfg = write_config(dir, "v.json", R"({
    "seed": 2,
    "system": {"kind": "vdp", "delta": 0.0, "burn_in": 500},
    "sampling": {"M1": 50},
    "dictionary": {"kind": "rbf", "centers": 8}})");
  REQUIRE(run("simulate --config " + cfg.string() + " --out " + (dir / "out").string()) == 0);
  const auto data = sresdmd::load_batched_snapshots(dir / "out" / "snapshots.csv");
  REQUIRE(data.realization_count() == 2);
  CHECK(data.realization(0) == data.realization(1));
  CHECK(run("eigs --config " + cfg.string() + " --out " + (dir / "out").string()) == 0);
  for (const auto& r : sresdmd::read_eigs_csv(dir / "out" / "eigs.csv")) CHECK(*r.res == r.res_var);
}
