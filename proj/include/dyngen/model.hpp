#pragma once

// The full generative model: parameter sets of every submodule plus the
// attribute scaler of the training data.

#include "dyngen/decoder.hpp"
#include "dyngen/encoder.hpp"
#include "dyngen/latent.hpp"
#include "dyngen/recurrence.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>

namespace dyngen {

struct ModelConfig {
  Eigen::Index num_nodes = 0;
  Eigen::Index attr_dim = 0;
  int enc_layers = 3;
  int mlp_layers = 2;
  Eigen::Index hidden = 16;        // d
  Eigen::Index hidden_state = 16;  // d_h
  Eigen::Index encoding = 16;      // d_eps
  Eigen::Index latent = 16;        // d_z
  Eigen::Index time_dim = 8;       // d_T
  Eigen::Index mixture = 4;        // K
  int gat_layers = 3;
  int gat_heads = 2;
  OutputActivation attr_output = OutputActivation::Identity;
  bool use_biflow = true;
  bool use_mixture = true;
  bool use_graph_attr_decoder = true;
  bool normalize_neighbors = true;  // encoder neighbour sums / mean degree
  /// Generation rescales attribute rows to the training data's mean row norm.
  /// The cosine loss only fixes row directions, so magnitude has no other source.
  bool calibrate_attr_norm = true;

  Eigen::Index condition_dim() const { return latent + hidden_state; }
};

void to_json(nlohmann::json& j, const ModelConfig& c);
/// Strict: unknown keys raise ConfigError.
void from_json(const nlohmann::json& j, ModelConfig& c);

std::string to_string(OutputActivation a);
OutputActivation output_activation_from_string(const std::string& s);

/// 64-bit FNV-1a over the canonical JSON dump of the config.
std::uint64_t config_hash(const ModelConfig& c);

class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  /// Writes params.bin and model.json (config, hash, scaler, shapes) into dir.
  void save(const std::filesystem::path& dir) const;
  static Model load(const std::filesystem::path& dir);

  EncoderParams encoder;
  SamplerParams sampler;
  DecoderParams decoder;
  TimeVecParams time;
  RecurrenceParams recurrence;
  AttributeScaler scaler;
  /// Mean L2 norm of model-space attribute rows seen in training; 0 when unknown.
  double attr_row_norm = 0.0;

 private:
  ModelConfig cfg_;
  ParameterSet params_;
};

}  // namespace dyngen
