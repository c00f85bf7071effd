#pragma once

#include "dyngen/model.hpp"

namespace dyngen {

enum class AdjacencyMode { Sample, Threshold };

struct GenerateConfig {
  Eigen::Index num_steps = 1;
  Eigen::Index num_nodes = 0;  // 0: use the model's node count
  std::uint64_t seed = 0;
  AdjacencyMode mode = AdjacencyMode::Sample;
  double threshold = 0.5;  // used in Threshold mode, must lie in (0, 1)
};

/// Generates a sequence from scratch using only the prior path: H_0 = 0, then
/// per step Z ~ prior(H), adjacency from the mixture, attributes over that
/// adjacency, and H advanced from the encoding of the generated snapshot.
/// Attributes are returned in raw (de-standardised) units.
TemporalGraph generate(const Model& model, const GenerateConfig& cfg);

}  // namespace dyngen
