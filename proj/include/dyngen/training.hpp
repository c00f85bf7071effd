#pragma once

// Step-wise ELBO: KL(posterior || prior) + mixture BCE on the adjacency +
// scaled cosine error on the attributes, optimised with truncated
// back-propagation through time.

#include "dyngen/model.hpp"

#include <nlohmann/json.hpp>

#include <optional>

namespace dyngen {

struct LossWeights {
  double prior = 1.0;
  double structure = 1.0;
  double attribute = 1.0;
};

struct TrainConfig {
  ModelConfig model;  // num_nodes / attr_dim are taken from the training graph
  int epochs = 100;
  double learning_rate = 5e-2;
  int sce_alpha = 2;
  LossWeights weights;
  /// tau: losses are accumulated over tau steps per update, and each window's
  /// incoming state stays attached to the last transition of the previous one.
  int bptt_window = 1;
  std::optional<int> negative_samples;    // Q; dense BCE when unset
  int latent_samples = 1;                 // Monte-Carlo draws of Z_t per step
  double clip_norm = 5.0;
  int plateau_patience = 10;
  double plateau_factor = 0.5;
  double min_learning_rate = 1e-4;
  double divergence_threshold = 1e6;
  std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

double structure_loss(const Adjacency& a, const MixtureParams& m);
ag::Var structure_loss(const Adjacency& a, const EdgeModelVars& m, const Matrix& weight = Matrix());

/// Keeps every edge and Q sampled non-edges per edge in each row (at least Q
/// when the row is empty); sampled non-edges are up-weighted so each row's
/// non-edge sum is unbiased.
Matrix negative_sampling_weights(const Adjacency& a, int q, Rng& rng);

struct AttributeLoss {
  double value = 0.0;
  int zero_norm_rows = 0;
};
/// (1/N) sum_i (1 - cos(x_i, x_hat_i))^alpha; a zero-norm row has cosine 0.
AttributeLoss attribute_loss(const Matrix& x, const Matrix& x_hat, int alpha);
ag::Var attribute_loss(const Matrix& x, const ag::Var& x_hat, int alpha, int* zero_norm_rows = nullptr);

struct StepLoss {
  ag::Var total;
  ag::Var prior;
  ag::Var structure;
  ag::Var attribute;
  ag::Var h_next;
  ag::Var encoding;  // inputs of the recurrent update, kept for truncation
  ag::Var latent;
};

/// Prepared per-snapshot inputs in model space.
struct StepInput {
  const Adjacency* adjacency = nullptr;
  const NeighborOps* ops = nullptr;
  Matrix attributes;  // scaled
  Eigen::Index t = 1;  // 1-based
};

/// Teacher-forced step: encodes the observed snapshot, samples Z_t from the
/// posterior, decodes structure and attributes, and advances the hidden state.
StepLoss step_loss(const StepInput& in, const ag::Var& h_prev, const Model& model, const TrainConfig& cfg, Rng& rng);
/// Convenience overload building the inputs from a raw snapshot.
StepLoss step_loss(const Snapshot& s, Eigen::Index t, const ag::Var& h_prev, const Model& model, const TrainConfig& cfg,
                   Rng& rng);

struct StepRecord {
  double total = 0.0;
  double prior = 0.0;
  double structure = 0.0;
  double attribute = 0.0;
};

struct EpochRecord {
  double total = 0.0;
  double prior = 0.0;
  double structure = 0.0;
  double attribute = 0.0;
  double learning_rate = 0.0;
  double seconds = 0.0;
  std::vector<StepRecord> steps;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;

  /// Loss curves only; deterministic for a fixed seed.
  nlohmann::ordered_json losses_json() const;
  nlohmann::ordered_json timing_json() const;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::map<std::string, Matrix> last_good, TrainReport report)
      : std::runtime_error(what), last_good(std::move(last_good)), report(std::move(report)) {}
  std::map<std::string, Matrix> last_good;
  TrainReport report;
};

struct TrainResult {
  Model model;
  TrainReport report;
};

TrainResult train(const TemporalGraph& g, const TrainConfig& cfg);

/// Builds the untrained model train() would start from.
Model initial_model(const TemporalGraph& g, const TrainConfig& cfg);

}  // namespace dyngen
