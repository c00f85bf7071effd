// dyngen: learn and sample dynamic attributed graphs from the command line.

#include "dyngen/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Dynamic attributed graph generator"};
  app.require_subcommand(1, 1);

  dyngen::cli::Overrides o;
  std::string config, out;
  std::uint64_t seed = 0;
  int epochs = 0, timesteps = 0;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"ingest", "Discretise a timestamped edge list into a canonical graph directory"},
      {"synth", "Write the planted two-community rotating sequence"},
      {"train", "Fit the model to the graph directory"},
      {"generate", "Sample a new sequence from a trained model"},
      {"evaluate", "Compare the generated sequence with the original"},
      {"diff", "Consecutive-snapshot difference series"},
      {"report", "Render loss curves, metric table and difference plots as SVG"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "JSON run config");
    sub->add_option("--seed", seed, "Seed for every stochastic step");
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--epochs", epochs, "Training epochs");
    sub->add_option("--timesteps", timesteps, "T for ingest, synth and generate");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : dyngen::cli::kConfig;
  }

  const CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--config")) o.config = config;
  if (sub->count("--seed")) o.seed = seed;
  if (sub->count("--out")) o.out = out;
  if (sub->count("--epochs")) o.epochs = epochs;
  if (sub->count("--timesteps")) o.timesteps = timesteps;
  return dyngen::cli::run(sub->get_name(), o, std::cout, std::cerr);
}
