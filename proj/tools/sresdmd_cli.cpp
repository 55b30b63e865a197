#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "sresdmd/errors.hpp"
#include "sresdmd/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Residual DMD for stochastic Koopman operators"};
  app.require_subcommand(1);

  std::string config_path;
  sresdmd::RunOptions opts;
  opts.threads = std::max(1u, std::thread::hardware_concurrency());
  std::string out_dir = "out";
  std::string bin;

  using Command = void (*)(const sresdmd::RunConfig&, const sresdmd::RunOptions&);
  const std::pair<const char*, std::pair<const char*, Command>> commands[] = {
      {"simulate", {"generate snapshot data for a built-in system", sresdmd::cmd_simulate}},
      {"matrices", {"assemble G, A, L (and H for batched data)", sresdmd::cmd_matrices}},
      {"eigs", {"eigenpairs with residuals", sresdmd::cmd_eigs}},
      {"pseudospec", {"pseudospectrum from the residual (needs batched data)", sresdmd::cmd_pseudospec}},
      {"var-pseudospec", {"variance-pseudospectrum", sresdmd::cmd_var_pseudospec}},
      {"forecast", {"forecast error bounds", sresdmd::cmd_forecast}},
      {"bounds", {"concentration bounds over a sweep of M", sresdmd::cmd_bounds}},
      {"all", {"every stage in order", sresdmd::cmd_all}},
  };
  Command chosen = nullptr;
  for (const auto& [name, info] : commands) {
    auto* sub = app.add_subcommand(name, info.first);
    sub->add_option("--config", config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    sub->add_option("--threads", opts.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--bin", bin, "bin unbatched data, e.g. grid:10x10:2");
    sub->callback([&chosen, fn = info.second] { chosen = fn; });
  }

  bool verify = false;
  auto* ver = app.add_subcommand("verify", "re-hash the config and outputs listed in the manifest");
  ver->add_option("--config", config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  ver->add_option("--out", out_dir, "output directory")->capture_default_str();
  ver->callback([&verify] { verify = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  opts.out_dir = out_dir;
  if (!bin.empty()) opts.bin = bin;
  try {
    if (verify) {
      const auto bad = sresdmd::verify_manifest(config_path, opts.out_dir);
      for (const auto& b : bad) std::cerr << "mismatch: " << b << '\n';
      return bad.empty() ? 0 : 2;
    }
    chosen(sresdmd::load_run_config(config_path), opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return sresdmd::exit_code_for(e);
  }
  return 0;
}
