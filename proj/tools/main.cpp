#include <CLI11.hpp>
#include <iostream>

#include "tweedie/app/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Blind Tweedie denoising: synthesize, train, estimate, denoise, evaluate"};
  app.require_subcommand(1);

  tweedie::app::CommandLine cli;
  std::string config;
  std::uint64_t seed = 0;
  std::string out;

  const char* names[][2] = {{"synth", "Write clean/noisy tensor pairs and a manifest"},
                            {"train", "Train the AR-DAE score network on the manifest's noisy images"},
                            {"estimate", "Blindly estimate noise model and level per image"},
                            {"denoise", "Blind denoising of every noisy image"},
                            {"eval", "PSNR table: noisy, blind, known level, exact posterior mean"}};
  std::vector<std::pair<CLI::App*, std::string>> subs;
  for (const auto& n : names) {
    CLI::App* sub = app.add_subcommand(n[0], n[1]);
    sub->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("--out", out, "Override the output directory");
    subs.emplace_back(sub, n[0]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : tweedie::app::kExitValidation;
  }

  for (const auto& [sub, name] : subs) {
    if (!sub->parsed()) continue;
    cli.config = config;
    if (sub->count("--seed")) cli.seed = seed;
    if (sub->count("--out")) cli.out = out;
    return tweedie::app::run_command(name, cli);
  }
  return tweedie::app::kExitValidation;
}
