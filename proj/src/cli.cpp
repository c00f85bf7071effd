#include "dyngen/cli.hpp"

#include "dyngen/error.hpp"
#include "dyngen/plot.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>

namespace dyngen::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void check_keys(const json& j, const std::set<std::string>& known, const std::string& section) {
  if (!j.is_object()) throw ConfigError(section + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in " + section);
  }
}

std::string policy_name(AttributePolicy p) {
  return p == AttributePolicy::CarryForward ? "carry_forward" : "event_counts";
}

AttributePolicy policy_from(const std::string& s) {
  if (s == "carry_forward") return AttributePolicy::CarryForward;
  if (s == "event_counts") return AttributePolicy::EventCounts;
  throw ConfigError("ingest.attribute_policy must be carry_forward or event_counts, got '" + s + "'");
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void write_json(const fs::path& path, const ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

void echo_config(const RunConfig& c, const std::string& command) {
  write_json(c.out / ("config_" + command + ".json"), to_json(c));
}

void require_exists(const fs::path& p, const std::string& what) {
  if (p.empty()) throw ConfigError(what + " path is not set");
  if (!fs::exists(p)) throw IoError(what + " not found: " + p.string());
}

TrainConfig seeded(TrainConfig tc, std::uint64_t seed) {
  tc.seed = seed;
  return tc;
}

int cmd_ingest(const RunConfig& c, std::ostream& out) {
  require_exists(c.edges, "edge list");
  IngestStats stats;
  TemporalGraph g = ingest_edge_list(c.edges, c.ingest, &stats);
  if (!c.attributes.empty()) {
    require_exists(c.attributes, "attribute file");
    g = ingest_attributes(g, c.attributes);
  }
  write_graph(g, c.graph_dir());
  ordered_json s;
  s["events"] = stats.events;
  s["self_loops_dropped"] = stats.self_loops_dropped;
  s["events_per_bin"] = stats.events_per_bin;
  write_json(c.out / "ingest_stats.json", s);
  out << "ingested N=" << g.num_nodes << " T=" << g.num_steps() << " F=" << g.attr_dim << " into "
      << c.graph_dir().string() << "\n";
  return kOk;
}

int cmd_synth(const RunConfig& c, std::ostream& out) {
  PlantedConfig pc = c.synth;
  pc.seed = c.seed;
  TemporalGraph g = planted_sequence(pc);
  if (c.synth_standardize) g = make_graph(std::move(g.snapshots), g.attr_dim, {}, true);
  write_graph(g, c.graph_dir());
  out << "planted sequence N=" << g.num_nodes << " T=" << g.num_steps() << " written to " << c.graph_dir().string()
      << "\n";
  return kOk;
}

int cmd_train(const RunConfig& c, std::ostream& out) {
  require_exists(c.graph_dir(), "graph directory");
  const TemporalGraph g = read_graph(c.graph_dir());
  const TrainConfig tc = seeded(c.train, c.seed);
  try {
    TrainResult res = train(g, tc);
    res.model.save(c.model_dir());
    write_json(c.out / "train_report.json", res.report.losses_json());
    write_json(c.out / "train_timing.json", res.report.timing_json());
    if (!res.report.epochs.empty()) {
      out << "trained " << res.report.epochs.size() << " epochs, loss " << res.report.epochs.front().total << " -> "
          << res.report.epochs.back().total << "\n";
    } else {
      out << "epochs = 0, saved the initial parameters\n";
    }
    return kOk;
  } catch (const TrainingDiverged& d) {
    Model m = initial_model(g, tc);
    m.params().assign(d.last_good);
    m.save(c.model_dir());
    write_json(c.out / "train_report.json", d.report.losses_json());
    write_json(c.out / "train_timing.json", d.report.timing_json());
    throw;
  }
}

int cmd_generate(const RunConfig& c, std::ostream& out) {
  require_exists(c.model_dir(), "model directory");
  const Model m = Model::load(c.model_dir());
  GenerateConfig gc = c.generate;
  gc.seed = c.seed;
  if (gc.num_steps == 0) {
    if (!fs::exists(c.graph_dir() / "manifest.json")) {
      throw ConfigError("generate.num_steps is 0 and no graph manifest to take T from");
    }
    gc.num_steps = read_json(c.graph_dir() / "manifest.json").at("T").get<Eigen::Index>();
  }
  const TemporalGraph g = generate(m, gc);
  write_graph(g, c.generated_dir());
  out << "generated " << g.num_steps() << " snapshots into " << c.generated_dir().string() << "\n";
  return kOk;
}

int cmd_evaluate(const RunConfig& c, std::ostream& out) {
  require_exists(c.graph_dir(), "graph directory");
  require_exists(c.generated_dir(), "generated directory");
  const MetricReport r = evaluate(read_graph(c.graph_dir()), read_graph(c.generated_dir()), c.metrics);
  write_json(c.out / "metrics.json", r.to_json());
  out << "in_deg_mmd " << r.in_deg_mmd << " out_deg_mmd " << r.out_deg_mmd << " attr_jsd " << r.attr_jsd << "\n";
  return kOk;
}

int cmd_diff(const RunConfig& c, std::ostream& out) {
  require_exists(c.graph_dir(), "graph directory");
  ordered_json j;
  j["orig"] = to_json(diff_series(read_graph(c.graph_dir())));
  if (fs::exists(c.generated_dir())) j["gen"] = to_json(diff_series(read_graph(c.generated_dir())));
  write_json(c.out / "diff.json", j);
  out << "difference series written to " << (c.out / "diff.json").string() << "\n";
  return kOk;
}

std::vector<double> column_of(const json& rows, const char* key) {
  std::vector<double> v;
  for (const auto& r : rows) v.push_back(r.at(key).get<double>());
  return v;
}

std::vector<double> doubles(const json& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(x.is_null() ? std::numeric_limits<double>::quiet_NaN() : x.get<double>());
  return v;
}

int cmd_report(const RunConfig& c, std::ostream& out) {
  const fs::path train_path = c.out / "train_report.json", metrics_path = c.out / "metrics.json";
  require_exists(train_path, "train report");
  require_exists(metrics_path, "metric report");
  const json train_j = read_json(train_path);
  const json metrics_j = read_json(metrics_path);
  const fs::path dir = c.out / "report";
  try {
    const json& epochs = train_j.at("epochs");
    write_text(dir / "loss_total.svg", line_plot_svg("Training loss", "epoch", {{"total", column_of(epochs, "total")}}));
    write_text(dir / "loss_components.svg",
               line_plot_svg("Loss components", "epoch",
                             {{"prior (KL)", column_of(epochs, "prior")},
                              {"structure", column_of(epochs, "structure")},
                              {"attribute", column_of(epochs, "attribute")}}));

    std::vector<std::pair<std::string, std::string>> rows;
    for (const auto& [key, value] : metrics_j.items()) {
      if (key == "diff_series" || key == "excluded_steps") continue;
      std::string text;
      if (value.is_null()) {
        text = "n/a";
      } else if (value.is_boolean()) {
        text = value.get<bool>() ? "yes" : "no";
      } else {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", value.get<double>());
        text = buf;
      }
      rows.emplace_back(key, text);
    }
    write_text(dir / "metrics.svg", table_svg("Generated vs original", rows));

    const json& diff = metrics_j.at("diff_series");
    const std::vector<std::pair<std::string, std::string>> panels = {{"degree", "Degree difference"},
                                                                     {"clustering", "Clustering difference"},
                                                                     {"coreness", "Coreness difference"},
                                                                     {"attr_mae", "Attribute MAE"},
                                                                     {"attr_rmse", "Attribute RMSE"}};
    for (const auto& [key, title] : panels) {
      write_text(dir / ("diff_" + key + ".svg"),
                 line_plot_svg(title, "step t (t vs t+1)",
                               {{"original", doubles(diff.at("orig").at(key))}, {"generated", doubles(diff.at("gen").at(key))}}));
    }
  } catch (const json::exception& e) {
    throw ParseError("report inputs", 0, e.what());
  }
  out << "report written to " << dir.string() << "\n";
  return kOk;
}

}  // namespace

fs::path RunConfig::graph_dir() const { return graph.empty() ? out / "graph" : graph; }
fs::path RunConfig::model_dir() const { return model.empty() ? out / "model" : model; }
fs::path RunConfig::generated_dir() const { return generated.empty() ? out / "generated" : generated; }

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["out"] = c.out.string();
  j["seed"] = c.seed;
  j["paths"] = {{"edges", c.edges.string()},
                {"attributes", c.attributes.string()},
                {"graph", c.graph_dir().string()},
                {"model", c.model_dir().string()},
                {"generated", c.generated_dir().string()}};
  j["ingest"] = {{"num_bins", c.ingest.num_bins},
                 {"attribute_policy", policy_name(c.ingest.attribute_policy)},
                 {"attr_dim", c.ingest.attr_dim},
                 {"standardize", c.ingest.standardize}};
  j["synth"] = {{"num_nodes", c.synth.num_nodes}, {"num_steps", c.synth.num_steps}, {"p_dense", c.synth.p_dense},
                {"p_sparse", c.synth.p_sparse},   {"p_cross", c.synth.p_cross},     {"shift", c.synth.shift},
                {"noise", c.synth.noise},         {"standardize", c.synth_standardize}};
  json train = c.train;
  train.erase("seed");
  j["train"] = ordered_json::parse(train.dump());
  j["generate"] = {{"num_steps", c.generate.num_steps},
                   {"mode", c.generate.mode == AdjacencyMode::Sample ? "sample" : "threshold"},
                   {"threshold", c.generate.threshold}};
  j["metrics"] = {{"bandwidth", c.metrics.bandwidth}, {"clustering_bins", c.metrics.clustering_bins}};
  return j;
}

void apply_json(const json& j, RunConfig& c) {
  check_keys(j, {"out", "seed", "paths", "ingest", "synth", "train", "generate", "metrics"}, "config");
  try {
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("paths")) {
      const json& p = j.at("paths");
      check_keys(p, {"edges", "attributes", "graph", "model", "generated"}, "paths");
      if (p.contains("edges")) c.edges = p.at("edges").get<std::string>();
      if (p.contains("attributes")) c.attributes = p.at("attributes").get<std::string>();
      if (p.contains("graph")) c.graph = p.at("graph").get<std::string>();
      if (p.contains("model")) c.model = p.at("model").get<std::string>();
      if (p.contains("generated")) c.generated = p.at("generated").get<std::string>();
    }
    if (j.contains("ingest")) {
      const json& s = j.at("ingest");
      check_keys(s, {"num_bins", "attribute_policy", "attr_dim", "standardize"}, "ingest");
      c.ingest.num_bins = s.value("num_bins", c.ingest.num_bins);
      if (s.contains("attribute_policy")) c.ingest.attribute_policy = policy_from(s.at("attribute_policy"));
      c.ingest.attr_dim = s.value("attr_dim", c.ingest.attr_dim);
      c.ingest.standardize = s.value("standardize", c.ingest.standardize);
    }
    if (j.contains("synth")) {
      const json& s = j.at("synth");
      check_keys(s, {"num_nodes", "num_steps", "p_dense", "p_sparse", "p_cross", "shift", "noise", "standardize"},
                 "synth");
      c.synth.num_nodes = s.value("num_nodes", c.synth.num_nodes);
      c.synth.num_steps = s.value("num_steps", c.synth.num_steps);
      c.synth.p_dense = s.value("p_dense", c.synth.p_dense);
      c.synth.p_sparse = s.value("p_sparse", c.synth.p_sparse);
      c.synth.p_cross = s.value("p_cross", c.synth.p_cross);
      c.synth.shift = s.value("shift", c.synth.shift);
      c.synth.noise = s.value("noise", c.synth.noise);
      c.synth_standardize = s.value("standardize", c.synth_standardize);
    }
    if (j.contains("train")) {
      if (j.at("train").contains("seed")) throw ConfigError("train.seed is not accepted; use the top-level seed");
      json merged = c.train;
      merged.erase("seed");
      for (const auto& [key, value] : j.at("train").items()) {
        if (key == "model" && value.is_object() && merged.contains("model")) {
          for (const auto& [mk, mv] : value.items()) merged["model"][mk] = mv;
        } else {
          merged[key] = value;
        }
      }
      from_json(merged, c.train);
    }
    if (j.contains("generate")) {
      const json& s = j.at("generate");
      check_keys(s, {"num_steps", "mode", "threshold"}, "generate");
      c.generate.num_steps = s.value("num_steps", c.generate.num_steps);
      if (s.contains("mode")) {
        const std::string mode = s.at("mode");
        if (mode == "sample") c.generate.mode = AdjacencyMode::Sample;
        else if (mode == "threshold") c.generate.mode = AdjacencyMode::Threshold;
        else throw ConfigError("generate.mode must be sample or threshold");
      }
      c.generate.threshold = s.value("threshold", c.generate.threshold);
    }
    if (j.contains("metrics")) {
      const json& s = j.at("metrics");
      check_keys(s, {"bandwidth", "clustering_bins"}, "metrics");
      c.metrics.bandwidth = s.value("bandwidth", c.metrics.bandwidth);
      c.metrics.clustering_bins = s.value("clustering_bins", c.metrics.clustering_bins);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.ingest.num_bins < 1) throw ConfigError("ingest.num_bins must be >= 1");
  if (c.generate.num_steps < 0) throw ConfigError("generate.num_steps must be >= 0");
  if (!(c.generate.threshold > 0.0 && c.generate.threshold < 1.0)) {
    throw ConfigError("generate.threshold must lie in (0, 1)");
  }
  if (!(c.metrics.bandwidth > 0.0)) throw ConfigError("metrics.bandwidth must be positive");
}

RunConfig resolve(const Overrides& o) {
  RunConfig c;
  if (o.config) {
    if (!fs::exists(*o.config)) throw IoError("config file not found: " + o.config->string());
    json j;
    try {
      std::ifstream in(*o.config);
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError(o.config->string() + ": " + e.what());
    }
    apply_json(j, c);
  }
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out = *o.out;
  if (o.epochs) {
    if (*o.epochs < 0) throw ConfigError("--epochs must be >= 0");
    c.train.epochs = *o.epochs;
  }
  if (o.timesteps) {
    if (*o.timesteps < 1) throw ConfigError("--timesteps must be >= 1");
    c.ingest.num_bins = *o.timesteps;
    c.synth.num_steps = *o.timesteps;
    c.generate.num_steps = *o.timesteps;
  }
  return c;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const TrainingDiverged*>(&e)) return kDiverged;
  if (dynamic_cast<const ConfigError*>(&e)) return kConfig;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) return kIo;
  if (dynamic_cast<const ShapeError*>(&e)) return kShape;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const EmptyInputError*>(&e) ||
      dynamic_cast<const DegenerateRangeError*>(&e) || dynamic_cast<const KeyError*>(&e)) {
    return kParse;
  }
  return kFailure;
}

const std::vector<std::string>& report_files() {
  static const std::vector<std::string> files = {
      "loss_total.svg",         "loss_components.svg", "metrics.svg",        "diff_degree.svg",
      "diff_clustering.svg",    "diff_coreness.svg",   "diff_attr_mae.svg", "diff_attr_rmse.svg"};
  return files;
}

int run(const std::string& command, const Overrides& o, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig c = resolve(o);
    using Handler = int (*)(const RunConfig&, std::ostream&);
    static const std::map<std::string, Handler> handlers = {
        {"ingest", cmd_ingest},     {"synth", cmd_synth}, {"train", cmd_train},  {"generate", cmd_generate},
        {"evaluate", cmd_evaluate}, {"diff", cmd_diff},   {"report", cmd_report}};
    const auto it = handlers.find(command);
    if (it == handlers.end()) throw ConfigError("unknown command '" + command + "'");
    fs::create_directories(c.out);
    echo_config(c, command);
    return it->second(c, out);
  } catch (const std::exception& e) {
    err << "dyngen " << command << ": " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace dyngen::cli
