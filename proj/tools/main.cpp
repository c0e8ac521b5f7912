#include <iostream>

#include <CLI11.hpp>

#include "koopeig/cli.hpp"

namespace cli = koopeig::cli;

int main(int argc, char** argv) {
  CLI::App app{"Koopman eigenfunctions by characteristics and oKEEDMD decompositions"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  double tol = 0.0;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  bool spectrum_demo = false;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    if (config_required) opt->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--tol", tol, "integrator tolerance");
    sub->add_option("--seed", seed, "seed for randomized sampling");
    sub->add_option("--threads", threads, "worker threads (0 = all cores)");
  };
  auto* eval = app.add_subcommand("eval", "evaluate one eigenfunction on a lattice");
  add_common(eval, true);
  auto* decompose = app.add_subcommand("decompose", "greedy oKEEDMD decomposition of a target");
  add_common(decompose, true);
  auto* spectrum = app.add_subcommand("spectrum", "approximate eigenfunctions on the action-angle annulus");
  add_common(spectrum, false);
  spectrum->add_flag("--spectrum-demo", spectrum_demo, "run with the built-in defaults");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(cli::kConfigError);
  }

  cli::RunConfig config;
  try {
    if (!config_path.empty()) {
      config = cli::load_config(config_path);
    } else {
      config = cli::parse_config("{}");
    }
    cli::Overrides overrides;
    auto* active = app.get_subcommands().front();
    if (active->count("--out")) overrides.output_dir = out_dir;
    if (active->count("--tol")) overrides.tol = tol;
    if (active->count("--seed")) overrides.seed = seed;
    if (active->count("--threads")) overrides.threads = threads;
    cli::apply_overrides(config, overrides);
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cli::kConfigError;
  }

  if (*eval) return cli::cmd_eval(config, std::cerr);
  if (*decompose) return cli::cmd_decompose(config, std::cerr);
  return cli::cmd_spectrum(config, std::cerr);
}
