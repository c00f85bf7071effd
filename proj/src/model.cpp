#include "dyngen/model.hpp"

#include "dyngen/error.hpp"

#include <fstream>
#include <set>

namespace dyngen {

std::string to_string(OutputActivation a) {
  switch (a) {
    case OutputActivation::Identity:
      return "identity";
    case OutputActivation::Relu:
      return "relu";
    case OutputActivation::Sigmoid:
      return "sigmoid";
  }
  return "identity";
}

OutputActivation output_activation_from_string(const std::string& s) {
  if (s == "identity") return OutputActivation::Identity;
  if (s == "relu") return OutputActivation::Relu;
  if (s == "sigmoid") return OutputActivation::Sigmoid;
  throw ConfigError("unknown attribute output activation '" + s + "' (expected identity, relu or sigmoid)");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"num_nodes", c.num_nodes},
                     {"attr_dim", c.attr_dim},
                     {"enc_layers", c.enc_layers},
                     {"mlp_layers", c.mlp_layers},
                     {"hidden", c.hidden},
                     {"hidden_state", c.hidden_state},
                     {"encoding", c.encoding},
                     {"latent", c.latent},
                     {"time_dim", c.time_dim},
                     {"mixture", c.mixture},
                     {"gat_layers", c.gat_layers},
                     {"gat_heads", c.gat_heads},
                     {"attr_output", to_string(c.attr_output)},
                     {"use_biflow", c.use_biflow},
                     {"normalize_neighbors", c.normalize_neighbors},
                     {"calibrate_attr_norm", c.calibrate_attr_norm},
                     {"use_mixture", c.use_mixture},
                     {"use_graph_attr_decoder", c.use_graph_attr_decoder}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  static const std::set<std::string> known = {"num_nodes",  "attr_dim",   "enc_layers",  "mlp_layers",
                                              "hidden",     "hidden_state", "encoding",  "latent",
                                              "time_dim",   "mixture",    "gat_layers",  "gat_heads",
                                              "attr_output", "use_biflow", "use_mixture", "use_graph_attr_decoder",
                                              "normalize_neighbors", "calibrate_attr_norm"};
  if (!j.is_object()) throw ConfigError("model config must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown model config key '" + key + "'");
  }
  try {
    c.num_nodes = j.value("num_nodes", c.num_nodes);
    c.attr_dim = j.value("attr_dim", c.attr_dim);
    c.enc_layers = j.value("enc_layers", c.enc_layers);
    c.mlp_layers = j.value("mlp_layers", c.mlp_layers);
    c.hidden = j.value("hidden", c.hidden);
    c.hidden_state = j.value("hidden_state", c.hidden_state);
    c.encoding = j.value("encoding", c.encoding);
    c.latent = j.value("latent", c.latent);
    c.time_dim = j.value("time_dim", c.time_dim);
    c.mixture = j.value("mixture", c.mixture);
    c.gat_layers = j.value("gat_layers", c.gat_layers);
    c.gat_heads = j.value("gat_heads", c.gat_heads);
    if (j.contains("attr_output")) c.attr_output = output_activation_from_string(j.at("attr_output").get<std::string>());
    c.use_biflow = j.value("use_biflow", c.use_biflow);
    c.normalize_neighbors = j.value("normalize_neighbors", c.normalize_neighbors);
    c.calibrate_attr_norm = j.value("calibrate_attr_norm", c.calibrate_attr_norm);
    c.use_mixture = j.value("use_mixture", c.use_mixture);
    c.use_graph_attr_decoder = j.value("use_graph_attr_decoder", c.use_graph_attr_decoder);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

std::uint64_t config_hash(const ModelConfig& c) {
  const std::string s = nlohmann::json(c).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.num_nodes < 1) throw ConfigError("model needs at least one node");
  if (cfg.attr_dim < 0) throw ConfigError("attribute dimension must be non-negative");
  Rng rng(seed);
  EncoderConfig ec;
  ec.attr_dim = cfg.attr_dim;
  ec.hidden = cfg.hidden;
  ec.out_dim = cfg.encoding;
  ec.layers = cfg.enc_layers;
  ec.mlp_layers = cfg.mlp_layers;
  ec.bidirectional = cfg.use_biflow;
  ec.normalize_neighbors = cfg.normalize_neighbors;
  encoder = EncoderParams::create(params_, "encoder", ec, rng);

  sampler = SamplerParams::create(params_, "sampler", {cfg.hidden_state, cfg.encoding, cfg.latent}, rng);

  DecoderConfig dc;
  dc.condition_dim = cfg.condition_dim();
  dc.attr_dim = cfg.attr_dim;
  dc.mixture = cfg.mixture;
  dc.hidden = cfg.hidden;
  dc.gat_layers = cfg.gat_layers;
  dc.gat_heads = cfg.gat_heads;
  dc.output = cfg.attr_output;
  dc.use_mixture = cfg.use_mixture;
  dc.use_graph_attr_decoder = cfg.use_graph_attr_decoder;
  decoder = DecoderParams::create(params_, "decoder", dc, rng);

  time = TimeVecParams::create(params_, "time", cfg.time_dim, rng);
  recurrence = RecurrenceParams::create(
      params_, "recurrence", {cfg.encoding + cfg.latent + cfg.time_dim, cfg.hidden_state}, rng);
  scaler = AttributeScaler::fit({}, cfg.attr_dim, false);
}

void Model::save(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  params_.save(dir / "params.bin");

  nlohmann::ordered_json manifest;
  manifest["format"] = "dyngen-model";
  manifest["version"] = ParameterSet::kFormatVersion;
  manifest["config"] = nlohmann::json(cfg_);
  manifest["config_hash"] = config_hash(cfg_);
  manifest["scaler"] = {{"enabled", scaler.enabled},
                        {"mean", std::vector<double>(scaler.mean.data(), scaler.mean.data() + scaler.mean.size())},
                        {"std", std::vector<double>(scaler.stddev.data(), scaler.stddev.data() + scaler.stddev.size())}};
  manifest["attr_row_norm"] = attr_row_norm;
  nlohmann::ordered_json shapes;
  for (const auto& [name, v] : params_.entries()) shapes[name] = {v.rows(), v.cols()};
  manifest["shapes"] = shapes;
  std::ofstream out(dir / "model.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "model.json").string());
  out << manifest.dump(2) << "\n";
}

Model Model::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "model.json");
  if (!in) throw IoError("cannot open " + (dir / "model.json").string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError((dir / "model.json").string(), 0, e.what());
  }
  ModelConfig cfg;
  from_json(manifest.at("config"), cfg);
  if (manifest.contains("config_hash") && manifest.at("config_hash").get<std::uint64_t>() != config_hash(cfg)) {
    throw ConfigError("model.json config hash does not match its config: " + dir.string());
  }
  Model m(cfg, 0);
  try {
    m.params().assign(ParameterSet::load_values(dir / "params.bin"));
  } catch (const std::invalid_argument& e) {
    throw ShapeError(std::string("parameter snapshot does not match model config: ") + e.what());
  } catch (const std::runtime_error& e) {
    throw IoError(e.what());
  }
  m.attr_row_norm = manifest.value("attr_row_norm", 0.0);
  const auto& s = manifest.at("scaler");
  m.scaler.enabled = s.value("enabled", false);
  auto mean = s.value("mean", std::vector<double>{});
  auto sd = s.value("std", std::vector<double>{});
  if (static_cast<Eigen::Index>(mean.size()) == cfg.attr_dim && static_cast<Eigen::Index>(sd.size()) == cfg.attr_dim) {
    m.scaler.mean = Eigen::Map<const RowVector>(mean.data(), cfg.attr_dim);
    m.scaler.stddev = Eigen::Map<const RowVector>(sd.data(), cfg.attr_dim);
  }
  return m;
}

}  // namespace dyngen
