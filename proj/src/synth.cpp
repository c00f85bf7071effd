#include "dyngen/synth.hpp"

#include "dyngen/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace dyngen {

int planted_community(const PlantedConfig& cfg, Eigen::Index i, Eigen::Index t) {
  const Eigen::Index half = cfg.num_nodes / 2;
  const Eigen::Index pos = ((i - (t - 1) * cfg.shift) % cfg.num_nodes + cfg.num_nodes) % cfg.num_nodes;
  return pos < half ? 0 : 1;
}

TemporalGraph planted_sequence(const PlantedConfig& cfg) {
  if (cfg.num_nodes < 2 || cfg.num_steps < 1) throw ConfigError("planted: need N >= 2 and T >= 1");
  for (double p : {cfg.p_dense, cfg.p_sparse, cfg.p_cross}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("planted: probabilities must lie in [0, 1]");
  }
  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, cfg.noise);
  const Eigen::Index n = cfg.num_nodes;
  std::vector<Snapshot> snaps;
  for (Eigen::Index t = 1; t <= cfg.num_steps; ++t) {
    Snapshot s;
    s.adjacency = Adjacency::Zero(n, n);
    s.attributes = Matrix::Zero(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int ci = planted_community(cfg, i, t);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const int cj = planted_community(cfg, j, t);
        const double p = ci != cj ? cfg.p_cross : (ci == 0 ? cfg.p_dense : cfg.p_sparse);
        s.adjacency(i, j) = unif(rng) < p ? 1 : 0;
      }
      s.attributes(i, ci) = 1.0;
      s.attributes(i, 0) += noise(rng);
      s.attributes(i, 1) += noise(rng);
    }
    snaps.push_back(std::move(s));
  }
  return make_graph(std::move(snaps), 2);
}

TrainConfig planted_train_config(const PlantedConfig& cfg) {
  TrainConfig tc;
  tc.epochs = 300;
  tc.learning_rate = 1e-2;
  tc.sce_alpha = 1;
  tc.weights.prior = 1.0 / static_cast<double>(std::max<Eigen::Index>(cfg.num_nodes, 1));
  tc.bptt_window = static_cast<int>(std::max<Eigen::Index>(cfg.num_steps, 1));
  tc.plateau_patience = 40;
  tc.model.hidden = 32;
  tc.model.latent = 8;
  return tc;
}

TemporalGraph erdos_renyi_baseline(const TemporalGraph& g, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Eigen::Index n = g.num_nodes;
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1);
  std::vector<Snapshot> snaps;
  for (const auto& src : g.snapshots) {
    const double p = pairs > 0 ? static_cast<double>(src.num_edges()) / pairs : 0.0;
    Snapshot s;
    s.adjacency = Adjacency::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j) s.adjacency(i, j) = unif(rng) < p ? 1 : 0;
    s.attributes = src.attributes;
    snaps.push_back(std::move(s));
  }
  TemporalGraph out = make_graph(std::move(snaps), g.attr_dim, g.labels);
  out.scaler = g.scaler;
  return out;
}

TemporalGraph normal_attribute_baseline(const TemporalGraph& g, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::vector<Snapshot> snaps;
  for (const auto& src : g.snapshots) {
    Snapshot s;
    s.adjacency = src.adjacency;
    const Matrix& x = src.attributes;
    s.attributes = Matrix(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double mu = x.col(c).mean();
      const double sd = x.rows() > 0 ? std::sqrt((x.col(c).array() - mu).square().mean()) : 0.0;
      for (Eigen::Index i = 0; i < x.rows(); ++i) s.attributes(i, c) = mu + sd * std_normal(rng);
    }
    snaps.push_back(std::move(s));
  }
  TemporalGraph out = make_graph(std::move(snaps), g.attr_dim, g.labels);
  out.scaler = g.scaler;
  return out;
}

}  // namespace dyngen
