#include "dyngen/inference.hpp"

#include "dyngen/error.hpp"

namespace dyngen {

TemporalGraph generate(const Model& model, const GenerateConfig& cfg) {
  const auto& mc = model.config();
  const Eigen::Index n = cfg.num_nodes == 0 ? mc.num_nodes : cfg.num_nodes;
  if (n != mc.num_nodes) {
    throw ConfigError("generate: requested " + std::to_string(n) + " nodes but the model was trained on " +
                      std::to_string(mc.num_nodes));
  }
  if (cfg.num_steps < 1) throw ConfigError("generate: num_steps must be >= 1");
  if (cfg.mode == AdjacencyMode::Threshold && !(cfg.threshold > 0.0 && cfg.threshold < 1.0)) {
    throw ConfigError("generate: threshold must lie in (0, 1)");
  }

  Rng rng(cfg.seed);
  Matrix h = Matrix::Zero(n, mc.hidden_state);
  std::vector<Snapshot> snaps;
  snaps.reserve(static_cast<std::size_t>(cfg.num_steps));
  for (Eigen::Index t = 0; t < cfg.num_steps; ++t) {
    const auto p = prior_params(h, model.sampler);
    const Matrix z = sample(p, standard_normal(n, mc.latent, rng));
    Matrix condition(n, mc.condition_dim());
    condition << z, h;

    const auto mixture = mixture_params(condition, model.decoder);
    Snapshot s;
    s.adjacency = cfg.mode == AdjacencyMode::Sample ? sample_adjacency(mixture, rng)
                                                    : threshold_adjacency(mixture, cfg.threshold);
    Matrix x_scaled = decode_attributes(condition, s.adjacency, model.decoder);
    if (mc.calibrate_attr_norm && model.attr_row_norm > 0.0) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double norm = x_scaled.row(i).norm();
        if (norm > 1e-12) x_scaled.row(i) *= model.attr_row_norm / norm;
      }
    }

    const Matrix enc = encode(s.adjacency, x_scaled, model.encoder);
    h = update_hidden(enc, z, time2vec_value(static_cast<double>(t + 1), model.time), h, model.recurrence);

    s.attributes = model.scaler.inverse(x_scaled);
    snaps.push_back(std::move(s));
  }
  TemporalGraph g = make_graph(std::move(snaps), mc.attr_dim);
  g.scaler = model.scaler;
  return g;
}

}  // namespace dyngen
