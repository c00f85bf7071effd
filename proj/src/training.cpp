#include "dyngen/training.hpp"

#include "dyngen/error.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

namespace dyngen {

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"model", c.model},
                     {"epochs", c.epochs},
                     {"learning_rate", c.learning_rate},
                     {"sce_alpha", c.sce_alpha},
                     {"loss_weights", {c.weights.prior, c.weights.structure, c.weights.attribute}},
                     {"bptt_window", c.bptt_window},
                     {"negative_samples", c.negative_samples ? nlohmann::json(*c.negative_samples) : nlohmann::json()},
                     {"latent_samples", c.latent_samples},
                     {"clip_norm", c.clip_norm},
                     {"plateau_patience", c.plateau_patience},
                     {"plateau_factor", c.plateau_factor},
                     {"min_learning_rate", c.min_learning_rate},
                     {"divergence_threshold", c.divergence_threshold},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  static const std::set<std::string> known = {
      "model",          "epochs",    "learning_rate",    "sce_alpha",      "loss_weights",
      "bptt_window",    "negative_samples", "latent_samples", "clip_norm", "plateau_patience",
      "plateau_factor", "min_learning_rate", "divergence_threshold", "seed"};
  if (!j.is_object()) throw ConfigError("train config must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown train config key '" + key + "'");
  }
  try {
    if (j.contains("model")) from_json(j.at("model"), c.model);
    c.epochs = j.value("epochs", c.epochs);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.sce_alpha = j.value("sce_alpha", c.sce_alpha);
    if (j.contains("loss_weights")) {
      auto w = j.at("loss_weights").get<std::vector<double>>();
      if (w.size() != 3) throw ConfigError("loss_weights needs three values (prior, structure, attribute)");
      c.weights = {w[0], w[1], w[2]};
    }
    c.bptt_window = j.value("bptt_window", c.bptt_window);
    if (j.contains("negative_samples") && !j.at("negative_samples").is_null()) {
      c.negative_samples = j.at("negative_samples").get<int>();
    }
    c.latent_samples = j.value("latent_samples", c.latent_samples);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
    c.plateau_factor = j.value("plateau_factor", c.plateau_factor);
    c.min_learning_rate = j.value("min_learning_rate", c.min_learning_rate);
    c.divergence_threshold = j.value("divergence_threshold", c.divergence_threshold);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  if (c.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (c.learning_rate <= 0) throw ConfigError("learning_rate must be positive");
  if (c.sce_alpha < 1) throw ConfigError("sce_alpha must be >= 1");
  if (c.bptt_window < 1) throw ConfigError("bptt_window must be >= 1");
  if (c.latent_samples < 1) throw ConfigError("latent_samples must be >= 1");
  if (c.negative_samples && *c.negative_samples < 1) throw ConfigError("negative_samples must be positive");
  if (c.weights.prior <= 0 || c.weights.structure <= 0 || c.weights.attribute <= 0) {
    throw ConfigError("loss weights must be positive");
  }
}

double structure_loss(const Adjacency& a, const MixtureParams& m) { return -edge_log_likelihood(m, a).mean(); }

ag::Var structure_loss(const Adjacency& a, const EdgeModelVars& m, const Matrix& weight) {
  return ag::scale(ag::mean(edge_log_likelihood(m, a, weight)), -1.0);
}

Matrix negative_sampling_weights(const Adjacency& a, int q, Rng& rng) {
  const Eigen::Index n = a.rows();
  Matrix w = Matrix::Zero(n, n);
  std::vector<Eigen::Index> negatives;
  for (Eigen::Index i = 0; i < n; ++i) {
    negatives.clear();
    Eigen::Index positives = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      if (a(i, j)) {
        w(i, j) = 1.0;
        ++positives;
      } else {
        negatives.push_back(j);
      }
    }
    if (negatives.empty()) continue;
    const auto want = std::min<std::size_t>(negatives.size(),
                                            static_cast<std::size_t>(q) * static_cast<std::size_t>(std::max<Eigen::Index>(positives, 1)));
    // Partial Fisher-Yates: the first `want` entries form a uniform subset.
    for (std::size_t k = 0; k < want; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, negatives.size() - 1);
      std::swap(negatives[k], negatives[pick(rng)]);
    }
    const double scale = static_cast<double>(negatives.size()) / static_cast<double>(want);
    for (std::size_t k = 0; k < want; ++k) w(i, negatives[k]) = scale;
  }
  return w;
}

AttributeLoss attribute_loss(const Matrix& x, const Matrix& x_hat, int alpha) {
  AttributeLoss out;
  out.value = attribute_loss(x, ag::constant(x_hat), alpha, &out.zero_norm_rows).scalar();
  return out;
}

ag::Var attribute_loss(const Matrix& x, const ag::Var& x_hat, int alpha, int* zero_norm_rows) {
  if (alpha < 1) throw std::invalid_argument("attribute_loss: alpha must be >= 1");
  if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols()) throw ShapeError("attribute_loss: shape mismatch");
  if (zero_norm_rows) {
    int zero = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (x.row(i).norm() == 0.0 || x_hat.value().row(i).norm() == 0.0) ++zero;
    }
    *zero_norm_rows = zero;
  }
  if (x.rows() == 0) return ag::constant(Matrix::Zero(1, 1));
  auto err = ag::add_scalar(ag::scale(ag::row_cosine(x, x_hat), -1.0), 1.0);
  return ag::mean(ag::pow_int(err, alpha));
}

namespace {

void require_finite(const ag::Var& v, const char* what, Eigen::Index t) {
  if (!std::isfinite(v.scalar())) {
    throw Error(std::string("non-finite ") + what + " loss at t=" + std::to_string(t));
  }
}

}  // namespace

StepLoss step_loss(const StepInput& in, const ag::Var& h_prev, const Model& model, const TrainConfig& cfg, Rng& rng) {
  const auto& mc = model.config();
  const Eigen::Index n = mc.num_nodes;
  if (!in.adjacency || !in.ops || in.adjacency->rows() != n || h_prev.rows() != n || in.attributes.rows() != n ||
      in.attributes.cols() != mc.attr_dim) {
    throw ShapeError("step_loss: snapshot does not match the model's node count or attribute width");
  }
  std::vector<Matrix> noise;
  for (int m = 0; m < cfg.latent_samples; ++m) noise.push_back(standard_normal(n, mc.latent, rng));
  Matrix weight;
  if (cfg.negative_samples) weight = negative_sampling_weights(*in.adjacency, *cfg.negative_samples, rng);

  auto x = ag::constant(in.attributes);
  auto enc = encode(*in.ops, x, model.encoder);
  auto p = prior(h_prev, model.sampler);
  auto q = posterior(enc, h_prev, model.sampler);

  StepLoss out;
  out.prior = kl_divergence(q, p);

  ag::Var structure, attribute, first_z;
  for (int m = 0; m < cfg.latent_samples; ++m) {
    auto z = sample(q, noise[static_cast<std::size_t>(m)]);
    if (m == 0) first_z = z;
    auto condition = ag::concat_cols({z, h_prev});
    auto s = structure_loss(*in.adjacency, edge_model(condition, model.decoder), weight);
    auto a = mc.attr_dim > 0 ? attribute_loss(in.attributes, decode_attributes(condition, *in.adjacency, model.decoder),
                                              cfg.sce_alpha)
                             : ag::constant(Matrix::Zero(1, 1));
    structure = m == 0 ? s : ag::add(structure, s);
    attribute = m == 0 ? a : ag::add(attribute, a);
  }
  if (cfg.latent_samples > 1) {
    structure = ag::scale(structure, 1.0 / cfg.latent_samples);
    attribute = ag::scale(attribute, 1.0 / cfg.latent_samples);
  }
  out.structure = structure;
  out.attribute = attribute;
  require_finite(out.prior, "prior", in.t);
  require_finite(out.structure, "structure", in.t);
  require_finite(out.attribute, "attribute", in.t);

  out.total = ag::add(ag::add(ag::scale(out.prior, cfg.weights.prior), ag::scale(out.structure, cfg.weights.structure)),
                      ag::scale(out.attribute, cfg.weights.attribute));
  out.encoding = enc;
  out.latent = first_z;
  out.h_next =
      update_hidden(enc, first_z, time2vec(static_cast<double>(in.t), model.time), h_prev, model.recurrence);
  return out;
}

StepLoss step_loss(const Snapshot& s, Eigen::Index t, const ag::Var& h_prev, const Model& model, const TrainConfig& cfg,
                   Rng& rng) {
  NeighborOps ops(s.adjacency);
  StepInput in{&s.adjacency, &ops, model.scaler.transform(s.attributes), t};
  return step_loss(in, h_prev, model, cfg, rng);
}

nlohmann::ordered_json TrainReport::losses_json() const {
  nlohmann::ordered_json j;
  j["num_epochs"] = epochs.size();
  auto arr = nlohmann::ordered_json::array();
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    const auto& r = epochs[e];
    nlohmann::ordered_json ej;
    ej["epoch"] = e + 1;
    ej["total"] = r.total;
    ej["prior"] = r.prior;
    ej["structure"] = r.structure;
    ej["attribute"] = r.attribute;
    ej["learning_rate"] = r.learning_rate;
    auto steps = nlohmann::ordered_json::array();
    for (const auto& s : r.steps) {
      steps.push_back({{"total", s.total}, {"prior", s.prior}, {"structure", s.structure}, {"attribute", s.attribute}});
    }
    ej["steps"] = steps;
    arr.push_back(ej);
  }
  j["epochs"] = arr;
  return j;
}

nlohmann::ordered_json TrainReport::timing_json() const {
  nlohmann::ordered_json j;
  std::vector<double> secs;
  for (const auto& e : epochs) secs.push_back(e.seconds);
  j["seconds_per_epoch"] = secs;
  j["total_seconds"] = std::accumulate(secs.begin(), secs.end(), 0.0);
  return j;
}

Model initial_model(const TemporalGraph& g, const TrainConfig& cfg) {
  ModelConfig mc = cfg.model;
  mc.num_nodes = g.num_nodes;
  mc.attr_dim = g.attr_dim;
  Model model(mc, cfg.seed);
  model.scaler = g.scaler;
  double norm_sum = 0.0;
  Eigen::Index rows = 0;
  for (const auto& s : g.snapshots) {
    if (g.attr_dim == 0) break;
    norm_sum += model.scaler.transform(s.attributes).rowwise().norm().sum();
    rows += s.attributes.rows();
  }
  model.attr_row_norm = rows > 0 ? norm_sum / static_cast<double>(rows) : 0.0;
  return model;
}

TrainResult train(const TemporalGraph& g, const TrainConfig& cfg) {
  if (auto v = validate(g); !v.empty()) throw ShapeError("train: invalid graph: " + v.front().to_string());
  if (cfg.epochs < 0 || cfg.bptt_window < 1) throw ConfigError("train: epochs must be >= 0 and bptt_window >= 1");

  TrainResult result{initial_model(g, cfg), {}};
  Model& model = result.model;
  const Eigen::Index n = g.num_nodes;
  const Eigen::Index steps = g.num_steps();

  std::vector<NeighborOps> ops;
  std::vector<StepInput> inputs;
  ops.reserve(static_cast<std::size_t>(steps));
  for (Eigen::Index t = 1; t <= steps; ++t) ops.emplace_back(g.at(t).adjacency);
  for (Eigen::Index t = 1; t <= steps; ++t) {
    inputs.push_back({&g.at(t).adjacency, &ops[static_cast<std::size_t>(t - 1)],
                      model.scaler.transform(g.at(t).attributes), t});
  }

  AdamConfig ac;
  ac.learning_rate = cfg.learning_rate;
  Adam adam(ac);
  PlateauSchedule schedule(cfg.plateau_patience, cfg.plateau_factor, cfg.min_learning_rate);
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  double lr = cfg.learning_rate;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    auto last_good = model.params().values();
    EpochRecord rec;
    rec.learning_rate = lr;
    ag::Var h = ag::constant(Matrix::Zero(n, model.config().hidden_state));
    ag::Var window;
    int in_window = 0;
    try {
      for (Eigen::Index t = 1; t <= steps; ++t) {
        auto step = step_loss(inputs[static_cast<std::size_t>(t - 1)], h, model, cfg, rng);
        StepRecord sr{step.total.scalar(), step.prior.scalar(), step.structure.scalar(), step.attribute.scalar()};
        rec.steps.push_back(sr);
        rec.total += sr.total;
        rec.prior += sr.prior;
        rec.structure += sr.structure;
        rec.attribute += sr.attribute;
        window = in_window == 0 ? step.total : ag::add(window, step.total);
        if (++in_window == cfg.bptt_window || t == steps) {
          model.params().zero_grad();
          ag::backward(window);
          clip_grad_norm(model.params(), cfg.clip_norm);
          adam.step(model.params());
          // Truncate before the last transition rather than after it, so the
          // next window still trains the recurrence that feeds it.
          h = update_hidden(step.encoding, step.latent, time2vec(static_cast<double>(t), model.time), ag::detach(h),
                            model.recurrence);
          in_window = 0;
        } else {
          h = step.h_next;
        }
      }
    } catch (const Error& e) {
      model.params().assign(last_good);
      result.report.epochs.push_back(rec);
      throw TrainingDiverged(std::string("training diverged in epoch ") + std::to_string(epoch + 1) + ": " + e.what(),
                             std::move(last_good), result.report);
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.report.epochs.push_back(rec);
    if (!std::isfinite(rec.total) || rec.total > cfg.divergence_threshold || !model.params().all_finite()) {
      model.params().assign(last_good);
      throw TrainingDiverged("training diverged in epoch " + std::to_string(epoch + 1) + ": total loss " +
                                 std::to_string(rec.total),
                             std::move(last_good), result.report);
    }
    lr = schedule.observe(rec.total, lr);
    adam.set_learning_rate(lr);
  }
  model.params().zero_grad();
  return result;
}

}  // namespace dyngen
