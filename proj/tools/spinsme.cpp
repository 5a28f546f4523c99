// spinsme <spectrum|trajectory|ensemble|sweep|correlated|validate> --config <path>
//         [--seed N] [--out DIR] [--force]
//
// Exit codes: 0 success, 2 invalid config or failed validity check,
// 3 numerical abort, 4 output error, 1 anything else.

#include <iostream>

#include "CLI11.hpp"
#include "spinsme/emit.hpp"
#include "spinsme/experiments.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitOutput = 4;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Homodyne spectra and stochastic master equations for dispersive readout"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  bool force = false;
  for (const auto& name : spinsme::kCommands) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment config (JSON) or run manifest")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed (overrides sim.seed)");
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
    sub->add_flag("--force", force, "run even if the validity check fails");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  const auto* sub = app.get_subcommands().front();

  try {
    auto config = spinsme::load_config(config_path);
    if (sub->count("--seed")) config.sim.seed = seed;
    if (sub->count("--out")) config.output.dir = out_dir;
    spinsme::RunOptions opts;
    opts.out_dir = config.output.dir;
    opts.force = force;
    const auto outcome = spinsme::run(command, config, opts);
    for (const auto& f : outcome.files) std::cout << f.string() << '\n';
    return 0;
  } catch (const spinsme::ValidationError& e) {
    std::cerr << "spinsme: invalid: " << e.what() << '\n';
    return kExitValidation;
  } catch (const spinsme::DimensionError& e) {
    std::cerr << "spinsme: invalid: " << e.what() << '\n';
    return kExitValidation;
  } catch (const spinsme::NumericalError& e) {
    std::cerr << "spinsme: numerical abort: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const spinsme::OutputError& e) {
    std::cerr << "spinsme: output: " << e.what() << '\n';
    return kExitOutput;
  } catch (const std::exception& e) {
    std::cerr << "spinsme: " << e.what() << '\n';
    return 1;
  }
}
