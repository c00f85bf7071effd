#pragma once

// Command layer behind the dyngen executable. Every command reads one
// resolved RunConfig and writes its outputs plus the resolved config into the
// output directory.

#include "dyngen/graph_store.hpp"
#include "dyngen/inference.hpp"
#include "dyngen/metrics.hpp"
#include "dyngen/synth.hpp"
#include "dyngen/training.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace dyngen::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfig = 2,
  kIo = 3,
  kShape = 4,
  kParse = 5,
  kDiverged = 6,
};

struct RunConfig {
  std::filesystem::path out = "run";
  std::uint64_t seed = 0;

  // Inputs and artifact locations; empty graph/model/generated paths resolve under out.
  std::filesystem::path edges;
  std::filesystem::path attributes;
  std::filesystem::path graph;
  std::filesystem::path model;
  std::filesystem::path generated;

  IngestSpec ingest;
  PlantedConfig synth;
  bool synth_standardize = false;
  TrainConfig train;
  GenerateConfig generate;  // num_steps 0: take T from the graph
  MmdConfig metrics;

  std::filesystem::path graph_dir() const;
  std::filesystem::path model_dir() const;
  std::filesystem::path generated_dir() const;
};

/// Full config including defaults. Seeds are not repeated inside sections.
nlohmann::ordered_json to_json(const RunConfig& c);
/// Applies the keys present in j on top of c. Unknown keys raise ConfigError.
void apply_json(const nlohmann::json& j, RunConfig& c);

struct Overrides {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<int> epochs;
  std::optional<int> timesteps;  // bins for ingest, steps for synth and generate
};

RunConfig resolve(const Overrides& o);

/// Runs one command and maps failures to exit codes, writing a diagnostic to err.
int run(const std::string& command, const Overrides& o, std::ostream& out, std::ostream& err);

/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

/// Names of the SVG files the report command writes.
const std::vector<std::string>& report_files();

}  // namespace dyngen::cli
