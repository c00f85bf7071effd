#pragma once

// Factorized snapshot decoder: mixture-Bernoulli directed adjacency first,
// then attributes from a graph attention network over that adjacency.

#include "dyngen/graph_store.hpp"
#include "dyngen/nn.hpp"

namespace dyngen {

enum class OutputActivation { Identity, Relu, Sigmoid };

struct DecoderConfig {
  Eigen::Index condition_dim = 32;  // d_z + d_h
  Eigen::Index attr_dim = 0;        // F
  Eigen::Index mixture = 4;         // K
  Eigen::Index hidden = 16;
  int gat_layers = 3;
  int gat_heads = 2;
  OutputActivation output = OutputActivation::Identity;
  /// false: inner-product edge model instead of the mixture (ablation).
  bool use_mixture = true;
  /// false: plain MLP on the condition rows instead of graph attention (ablation).
  bool use_graph_attr_decoder = true;
};

struct AttentionLayer {
  std::vector<ag::Var> weight;  // per head, d_in x d_out
  std::vector<ag::Var> att_src;  // per head, d_out x 1
  std::vector<ag::Var> att_dst;  // per head, d_out x 1
  ag::Var residual;              // d_in x d_out when d_in != d_out
};

struct DecoderParams {
  DecoderConfig cfg;
  Mlp f_alpha;
  Mlp f_theta;
  Dense inner_product;  // condition_dim -> hidden, inner-product edge model only
  ag::Var inner_bias;   // 1x1
  std::vector<AttentionLayer> gat;
  Mlp attr_mlp;

  static DecoderParams create(ParameterSet& ps, const std::string& prefix, const DecoderConfig& cfg, Rng& rng);
};

/// alpha rows lie on the simplex; theta(i, k, j) in (0, 1) off-diagonal and 0 on the diagonal.
struct MixtureParams {
  Matrix alpha;   // N x K
  Matrix theta;   // N*N x K, row i*N + j

  Eigen::Index num_nodes() const { return alpha.rows(); }
  Eigen::Index num_components() const { return alpha.cols(); }
  double theta_at(Eigen::Index i, Eigen::Index k, Eigen::Index j) const { return theta(i * num_nodes() + j, k); }
  /// Builds from per-component N x N probability matrices; diagonals are zeroed.
  static MixtureParams from_components(const Matrix& alpha, const std::vector<Matrix>& theta_k);
};

/// Differentiable edge model. The inner-product head is the K = 1 case with log_alpha = 0.
struct EdgeModelVars {
  ag::Var log_alpha;  // N x K
  ag::Var logits;     // N*N x K

  MixtureParams values() const;
};

EdgeModelVars edge_model(const ag::Var& condition, const DecoderParams& params);
MixtureParams mixture_params(const Matrix& condition, const DecoderParams& params);

/// Per-node log p(A_i) under the mixture; weight (optional, N x N) rescales each
/// edge indicator term for negative sampling.
ag::Var edge_log_likelihood(const EdgeModelVars& m, const Adjacency& a, const Matrix& weight = Matrix());
Vector edge_log_likelihood(const MixtureParams& m, const Adjacency& a);

Adjacency sample_adjacency(const MixtureParams& m, Rng& rng);
/// Deterministic [sum_k alpha_ik theta_ikj > threshold].
Adjacency threshold_adjacency(const MixtureParams& m, double threshold);

ag::Var decode_attributes(const ag::Var& condition, const Adjacency& a, const DecoderParams& params);
Matrix decode_attributes(const Matrix& condition, const Adjacency& a, const DecoderParams& params);

/// Attention mask: row i admits its in-neighbours (a[j][i] = 1) and itself.
BoolMatrix attention_mask(const Adjacency& a);

}  // namespace dyngen
