#pragma once

// Bidirectional (in-flow / out-flow) message passing encoder with a shared
// aggregator per layer and jump-connection pooling over all hop-level states.

#include "dyngen/graph_store.hpp"
#include "dyngen/nn.hpp"

namespace dyngen {

struct EncoderConfig {
  Eigen::Index attr_dim = 0;   // F
  Eigen::Index hidden = 16;    // d
  Eigen::Index out_dim = 16;   // d_eps
  int layers = 3;              // L
  int mlp_layers = 2;          // L_m, dense layers inside f_in / f_out
  /// When false, a single flow over the undirected projection replaces the
  /// in/out split and the aggregator (ablation).
  bool bidirectional = true;
  /// Divide neighbour sums by max(1, mean degree of the snapshot). Keeps hop
  /// states O(1) on dense snapshots; still injective within one snapshot.
  bool normalize_neighbors = true;
};

struct EncoderParams {
  EncoderConfig cfg;
  Dense input;           // F -> d, present when F > 0
  ag::Var constant_row;  // 1 x d, present when F == 0
  std::vector<Mlp> f_in;
  std::vector<Mlp> f_out;
  std::vector<ag::Var> eps_in;   // 1x1 per layer
  std::vector<ag::Var> eps_out;  // 1x1 per layer
  Mlp f_agg;                     // 2d -> d, shared across layers
  Mlp f_pool;                    // L*d -> d_eps

  static EncoderParams create(ParameterSet& ps, const std::string& prefix, const EncoderConfig& cfg, Rng& rng);
};

/// Neighbourhood sum operators for one adjacency. Dense up to
/// kSparseThreshold nodes, sparse beyond.
class NeighborOps {
 public:
  static constexpr Eigen::Index kSparseThreshold = 2000;

  explicit NeighborOps(const Adjacency& a, bool force_sparse = false);

  /// Row i = sum over j with a[j][i] = 1 of h_j.
  ag::Var in_sum(const ag::Var& h) const;
  /// Row i = sum over j with a[i][j] = 1 of h_j.
  ag::Var out_sum(const ag::Var& h) const;
  /// Sum over the undirected neighbourhood (in union out).
  ag::Var undirected_sum(const ag::Var& h) const;
  Eigen::Index num_nodes() const { return n_; }
  /// Mean directed degree E / N, and mean degree of the undirected projection.
  double mean_degree() const { return mean_degree_; }
  double mean_undirected_degree() const { return mean_undirected_degree_; }
  bool sparse() const { return sparse_; }

 private:
  Eigen::Index n_;
  bool sparse_;
  double mean_degree_ = 0.0;
  double mean_undirected_degree_ = 0.0;
  ag::Var dense_in_, dense_out_, dense_und_;
  SparseMatrix sp_in_, sp_out_, sp_und_;
};

struct FlowStates {
  ag::Var in;
  ag::Var out;
};

ag::Var init_features(const ag::Var& x, const EncoderParams& params, Eigen::Index num_nodes);
/// In-flow and out-flow states of layer l (1-based) before aggregation.
FlowStates flow_states(const ag::Var& h, const NeighborOps& ops, int l, const EncoderParams& params);
ag::Var biflow_layer(const ag::Var& h, const NeighborOps& ops, int l, const EncoderParams& params);
/// N x d_eps encoding of one snapshot given model-space attributes.
ag::Var encode(const NeighborOps& ops, const ag::Var& x, const EncoderParams& params);

Matrix encode(const Adjacency& a, const Matrix& x, const EncoderParams& params);

}  // namespace dyngen
