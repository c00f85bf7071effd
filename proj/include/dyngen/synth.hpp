#pragma once

// Planted benchmark sequence and the reference baselines the generator is
// compared against.

#include "dyngen/graph_store.hpp"
#include "dyngen/nn.hpp"
#include "dyngen/training.hpp"

namespace dyngen {

struct PlantedConfig {
  Eigen::Index num_nodes = 40;
  Eigen::Index num_steps = 8;
  double p_dense = 0.4;   // edge probability inside community A
  double p_sparse = 0.1;  // inside community B
  double p_cross = 0.02;
  Eigen::Index shift = 4;  // nodes moving from A to B (and back) each step
  double noise = 0.01;     // attribute noise stddev
  std::uint64_t seed = 7;
};

/// Two communities over a fixed node set whose membership rotates by `shift`
/// positions per step. F = 2: attributes are the one-hot community indicator
/// plus Gaussian noise.
TemporalGraph planted_sequence(const PlantedConfig& cfg);

/// Training settings validated on the planted sequence. The KL term is a sum
/// over nodes while both reconstruction terms are per-node means, so the prior
/// weight is 1/N to put them on one scale.
TrainConfig planted_train_config(const PlantedConfig& cfg);

/// Community of node i at step t (1-based): 0 = dense block, 1 = sparse block.
int planted_community(const PlantedConfig& cfg, Eigen::Index i, Eigen::Index t);

/// Erdos-Renyi sequence matching each snapshot's directed edge density.
/// Attributes are copied so only the structure differs.
TemporalGraph erdos_renyi_baseline(const TemporalGraph& g, std::uint64_t seed);

/// Each step's attributes drawn i.i.d. from per-dimension normals fitted to that
/// step; adjacency is copied so only attributes differ.
TemporalGraph normal_attribute_baseline(const TemporalGraph& g, std::uint64_t seed);

}  // namespace dyngen
