#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "netconform/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Split conformal prediction for network data"};
  app.set_version_flag("--version", std::string(netconform::version));
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates;

  for (const char* name : {"simulate", "extract", "conform", "experiment", "classify"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "Run configuration (TOML or JSON)")->required();
    sub->add_option("--out", out, "Output directory")->required();
    sub->add_option("--seed", seed, "Override the configured seed");
    sub->add_option("--replicates", replicates, "Override the configured replicate count");
  }
  CLI11_PARSE(app, argc, argv);

  netconform::RunSpec spec;
  spec.command = netconform::command_from_name(app.get_subcommands().front()->get_name());
  spec.config_path = config;
  spec.out_dir = out;
  spec.seed = seed;
  spec.replicates = replicates;
  return netconform::run_command(spec, std::cerr);
}
