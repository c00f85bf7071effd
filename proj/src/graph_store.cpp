#include "dyngen/graph_store.hpp"

#include "dyngen/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace dyngen {
namespace {

std::vector<std::string> tokenize(const std::string& raw) {
  std::string line = raw.substr(0, raw.find('#'));
  std::replace(line.begin(), line.end(), ',', ' ');
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_index(const std::string& s, long long& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string step_name(const char* prefix, Eigen::Index t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_t%04ld.txt", prefix, static_cast<long>(t));
  return buf;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

std::size_t Snapshot::num_edges() const {
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < adjacency.size(); ++i) n += adjacency.data()[i] != 0;
  return n;
}

AttributeScaler AttributeScaler::fit(const std::vector<Snapshot>& snapshots, Eigen::Index attr_dim, bool enabled) {
  AttributeScaler s;
  s.enabled = enabled;
  s.mean = RowVector::Zero(attr_dim);
  s.stddev = RowVector::Ones(attr_dim);
  if (!enabled || attr_dim == 0 || snapshots.empty()) return s;
  double count = 0.0;
  RowVector sum = RowVector::Zero(attr_dim);
  RowVector sq = RowVector::Zero(attr_dim);
  for (const auto& snap : snapshots) {
    sum += snap.attributes.colwise().sum();
    sq += snap.attributes.array().square().matrix().colwise().sum();
    count += static_cast<double>(snap.attributes.rows());
  }
  if (count == 0.0) return s;
  s.mean = sum / count;
  for (Eigen::Index f = 0; f < attr_dim; ++f) {
    const double var = std::max(0.0, sq(f) / count - s.mean(f) * s.mean(f));
    const double sd = std::sqrt(var);
    s.stddev(f) = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

Matrix AttributeScaler::transform(const Matrix& raw) const {
  if (!enabled || raw.cols() == 0) return raw;
  return (raw.rowwise() - mean).array().rowwise() / stddev.array();
}

Matrix AttributeScaler::inverse(const Matrix& scaled) const {
  if (!enabled || scaled.cols() == 0) return scaled;
  Matrix out = scaled.array().rowwise() * stddev.array();
  return out.rowwise() + mean;
}

std::string TemporalGraph::label(Eigen::Index i) const {
  return labels.empty() ? std::to_string(i) : labels.at(static_cast<std::size_t>(i));
}

std::string Violation::to_string() const {
  std::string s = rule;
  if (t > 0) s += ", t=" + std::to_string(t);
  if (!detail.empty()) s += ", " + detail;
  return s;
}

std::vector<Violation> validate(const TemporalGraph& g) {
  std::vector<Violation> out;
  const Eigen::Index n = g.num_nodes;
  if (n <= 0) out.push_back({0, "non-positive node count", "N=" + std::to_string(n)});
  if (g.attr_dim < 0) out.push_back({0, "negative attribute dimension", ""});
  if (g.snapshots.empty()) out.push_back({0, "empty snapshot sequence", ""});
  if (!g.labels.empty()) {
    if (static_cast<Eigen::Index>(g.labels.size()) != n) {
      out.push_back({0, "label count mismatch", std::to_string(g.labels.size()) + " labels for N=" + std::to_string(n)});
    }
    std::vector<std::string> sorted = g.labels;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) out.push_back({0, "duplicate labels", ""});
  }
  for (std::size_t k = 0; k < g.snapshots.size(); ++k) {
    const auto t = static_cast<Eigen::Index>(k + 1);
    const auto& s = g.snapshots[k];
    if (s.adjacency.rows() != n || s.adjacency.cols() != n) {
      out.push_back({t, "adjacency shape",
                     std::to_string(s.adjacency.rows()) + "x" + std::to_string(s.adjacency.cols())});
      continue;
    }
    if (s.attributes.rows() != n || s.attributes.cols() != g.attr_dim) {
      out.push_back({t, "attribute shape",
                     std::to_string(s.attributes.rows()) + "x" + std::to_string(s.attributes.cols())});
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (s.adjacency(i, i) != 0) out.push_back({t, "self-loop", "node " + std::to_string(i)});
      for (Eigen::Index j = 0; j < n; ++j) {
        if (s.adjacency(i, j) > 1) {
          out.push_back({t, "non-binary adjacency", "entry (" + std::to_string(i) + ", " + std::to_string(j) + ")"});
        }
      }
    }
    for (Eigen::Index i = 0; i < s.attributes.rows(); ++i) {
      for (Eigen::Index f = 0; f < s.attributes.cols(); ++f) {
        if (!std::isfinite(s.attributes(i, f))) {
          out.push_back({t, "non-finite attribute", "node " + std::to_string(i) + ", dim " + std::to_string(f)});
        }
      }
    }
  }
  return out;
}

TemporalGraph make_graph(std::vector<Snapshot> snapshots, Eigen::Index attr_dim, std::vector<std::string> labels,
                         bool standardize) {
  TemporalGraph g;
  g.num_nodes = snapshots.empty() ? 0 : snapshots.front().num_nodes();
  g.attr_dim = attr_dim;
  g.snapshots = std::move(snapshots);
  g.labels = std::move(labels);
  auto violations = validate(g);
  if (!violations.empty()) {
    std::string msg = "invalid temporal graph:";
    for (std::size_t i = 0; i < violations.size() && i < 8; ++i) msg += " [" + violations[i].to_string() + "]";
    throw ShapeError(msg);
  }
  g.scaler = AttributeScaler::fit(g.snapshots, attr_dim, standardize);
  return g;
}

TemporalGraph ingest_edge_list(const std::filesystem::path& path, const IngestSpec& spec, IngestStats* stats) {
  if (spec.num_bins < 1) throw ShapeError("num_bins must be >= 1");
  struct Event {
    Eigen::Index src, dst;
    double ts;
  };
  std::vector<Event> events;
  std::vector<std::string> labels;
  std::unordered_map<std::string, Eigen::Index> index;
  auto intern = [&](const std::string& label) {
    auto [it, inserted] = index.emplace(label, static_cast<Eigen::Index>(labels.size()));
    if (inserted) labels.push_back(label);
    return it->second;
  };

  auto in = open_input(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto tok = tokenize(line);
    if (tok.empty()) continue;
    if (tok.size() != 3) {
      throw ParseError(path.string(), lineno, "expected 'src dst ts', got " + std::to_string(tok.size()) + " fields");
    }
    double ts = 0.0;
    if (!parse_double(tok[2], ts) || !std::isfinite(ts)) {
      throw ParseError(path.string(), lineno, "timestamp is not a finite number: '" + tok[2] + "'");
    }
    const auto src = intern(tok[0]);
    const auto dst = intern(tok[1]);
    events.push_back({src, dst, ts});
  }
  if (events.empty()) throw EmptyInputError("no edge events in " + path.string());

  auto [lo_it, hi_it] = std::minmax_element(events.begin(), events.end(),
                                            [](const Event& a, const Event& b) { return a.ts < b.ts; });
  const double lo = lo_it->ts;
  const double hi = hi_it->ts;
  const Eigen::Index bins = spec.num_bins;
  if (hi == lo && bins > 1) {
    throw DegenerateRangeError("all timestamps equal " + format_double(lo) + " but " + std::to_string(bins) +
                               " bins were requested");
  }

  const auto n = static_cast<Eigen::Index>(labels.size());
  const bool counts = spec.attribute_policy == AttributePolicy::EventCounts;
  const Eigen::Index f = counts ? 2 : spec.attr_dim;
  std::vector<Snapshot> snaps(static_cast<std::size_t>(bins));
  for (auto& s : snaps) {
    s.adjacency = Adjacency::Zero(n, n);
    s.attributes = Matrix::Zero(n, f);
  }
  IngestStats local;
  local.events_per_bin.assign(static_cast<std::size_t>(bins), 0);
  for (const auto& e : events) {
    Eigen::Index b = 0;
    if (hi > lo) {
      b = static_cast<Eigen::Index>(std::floor((e.ts - lo) / (hi - lo) * static_cast<double>(bins)));
      b = std::clamp<Eigen::Index>(b, 0, bins - 1);
    }
    auto& s = snaps[static_cast<std::size_t>(b)];
    ++local.events;
    ++local.events_per_bin[static_cast<std::size_t>(b)];
    if (counts) {
      s.attributes(e.src, 0) += 1.0;
      s.attributes(e.dst, 1) += 1.0;
    }
    if (e.src == e.dst) {
      ++local.self_loops_dropped;
      continue;
    }
    s.adjacency(e.src, e.dst) = 1;
  }
  if (stats) *stats = std::move(local);
  return make_graph(std::move(snaps), f, std::move(labels), spec.standardize);
}

TemporalGraph ingest_attributes(const TemporalGraph& g, const std::filesystem::path& path) {
  std::unordered_map<std::string, Eigen::Index> index;
  for (Eigen::Index i = 0; i < g.num_nodes; ++i) index.emplace(g.label(i), i);

  const Eigen::Index n = g.num_nodes;
  const Eigen::Index steps = g.num_steps();
  Eigen::Index f = -1;
  // observed[t][i] holds the row for (node i, step t+1) when present.
  std::vector<Matrix> values;
  std::vector<std::vector<bool>> seen;

  auto in = open_input(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto tok = tokenize(line);
    if (tok.empty()) continue;
    if (tok.size() < 2) throw ParseError(path.string(), lineno, "expected 'label t v1 ... vF'");
    const auto width = static_cast<Eigen::Index>(tok.size()) - 2;
    if (f < 0) {
      f = width;
      values.assign(static_cast<std::size_t>(steps), Matrix::Zero(n, f));
      seen.assign(static_cast<std::size_t>(steps), std::vector<bool>(static_cast<std::size_t>(n), false));
    } else if (width != f) {
      throw ShapeError(path.string() + ":" + std::to_string(lineno) + ": row has " + std::to_string(width) +
                       " attribute values, expected " + std::to_string(f));
    }
    auto it = index.find(tok[0]);
    if (it == index.end()) throw KeyError(path.string() + ":" + std::to_string(lineno) + ": unknown node '" + tok[0] + "'");
    long long t = 0;
    if (!parse_index(tok[1], t)) throw ParseError(path.string(), lineno, "timestep is not an integer: '" + tok[1] + "'");
    if (t < 1 || t > steps) {
      throw KeyError(path.string() + ":" + std::to_string(lineno) + ": timestep " + tok[1] + " outside [1, " +
                     std::to_string(steps) + "]");
    }
    for (Eigen::Index k = 0; k < f; ++k) {
      double v = 0.0;
      if (!parse_double(tok[static_cast<std::size_t>(k + 2)], v)) {
        throw ParseError(path.string(), lineno, "attribute value is not a number: '" + tok[static_cast<std::size_t>(k + 2)] + "'");
      }
      values[static_cast<std::size_t>(t - 1)](it->second, k) = v;
    }
    seen[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(it->second)] = true;
  }

  TemporalGraph out = g;
  if (f < 0) return out;  // nothing observed: keep existing (zero) attributes
  out.attr_dim = f;
  for (Eigen::Index i = 0; i < n; ++i) {
    RowVector last = RowVector::Zero(f);
    for (Eigen::Index t = 0; t < steps; ++t) {
      const auto k = static_cast<std::size_t>(t);
      if (seen[k][static_cast<std::size_t>(i)]) last = values[k].row(i);
      values[k].row(i) = last;
    }
  }
  for (Eigen::Index t = 0; t < steps; ++t) out.snapshots[static_cast<std::size_t>(t)].attributes = values[static_cast<std::size_t>(t)];
  out.scaler = AttributeScaler::fit(out.snapshots, f, g.scaler.enabled);
  return out;
}

void write_graph(const TemporalGraph& g, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

  nlohmann::ordered_json manifest;
  manifest["format"] = "dyngen-graph";
  manifest["version"] = 1;
  manifest["N"] = g.num_nodes;
  manifest["T"] = g.num_steps();
  manifest["F"] = g.attr_dim;
  manifest["standardized"] = g.scaler.enabled;
  std::vector<double> mean(g.scaler.mean.data(), g.scaler.mean.data() + g.scaler.mean.size());
  std::vector<double> sd(g.scaler.stddev.data(), g.scaler.stddev.data() + g.scaler.stddev.size());
  manifest["mean"] = mean;
  manifest["std"] = sd;
  {
    auto out = open_output(dir / "manifest.json");
    out << manifest.dump(2) << "\n";
  }
  {
    auto out = open_output(dir / "nodes.txt");
    for (Eigen::Index i = 0; i < g.num_nodes; ++i) out << g.label(i) << "\n";
  }
  for (Eigen::Index t = 1; t <= g.num_steps(); ++t) {
    const auto& s = g.at(t);
    {
      auto out = open_output(dir / step_name("edges", t));
      for (Eigen::Index i = 0; i < s.adjacency.rows(); ++i)
        for (Eigen::Index j = 0; j < s.adjacency.cols(); ++j)
          if (s.adjacency(i, j)) out << i << " " << j << "\n";
      if (!out) throw IoError("write failed: " + (dir / step_name("edges", t)).string());
    }
    const auto attr_path = dir / step_name("attrs", t);
    if (g.attr_dim == 0) {
      std::filesystem::remove(attr_path, ec);
      continue;
    }
    auto out = open_output(attr_path);
    for (Eigen::Index i = 0; i < s.attributes.rows(); ++i) {
      for (Eigen::Index f = 0; f < s.attributes.cols(); ++f) out << (f ? " " : "") << format_double(s.attributes(i, f));
      out << "\n";
    }
    if (!out) throw IoError("write failed: " + attr_path.string());
  }
}

TemporalGraph read_graph(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  {
    auto in = open_input(dir / "manifest.json");
    try {
      in >> manifest;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError((dir / "manifest.json").string(), 0, e.what());
    }
  }
  Eigen::Index n = 0, steps = 0, f = 0;
  bool standardized = false;
  std::vector<double> mean, sd;
  try {
    n = manifest.at("N").get<Eigen::Index>();
    steps = manifest.at("T").get<Eigen::Index>();
    f = manifest.at("F").get<Eigen::Index>();
    standardized = manifest.value("standardized", false);
    mean = manifest.value("mean", std::vector<double>{});
    sd = manifest.value("std", std::vector<double>{});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError((dir / "manifest.json").string(), 0, e.what());
  }
  if (n <= 0 || steps <= 0 || f < 0) throw ShapeError("manifest declares invalid N/T/F in " + dir.string());

  std::vector<std::string> labels;
  if (std::filesystem::exists(dir / "nodes.txt")) {
    auto in = open_input(dir / "nodes.txt");
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) labels.push_back(line);
    }
    if (static_cast<Eigen::Index>(labels.size()) != n) {
      throw ShapeError("nodes.txt lists " + std::to_string(labels.size()) + " nodes, manifest says " + std::to_string(n));
    }
  }

  std::vector<Snapshot> snaps;
  for (Eigen::Index t = 1; t <= steps; ++t) {
    Snapshot s;
    s.adjacency = Adjacency::Zero(n, n);
    s.attributes = Matrix::Zero(n, f);
    const auto epath = dir / step_name("edges", t);
    auto in = open_input(epath);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto tok = tokenize(line);
      if (tok.empty()) continue;
      long long a = 0, b = 0;
      if (tok.size() != 2 || !parse_index(tok[0], a) || !parse_index(tok[1], b)) {
        throw ParseError(epath.string(), lineno, "expected 'src dst' node indices");
      }
      if (a < 0 || b < 0 || a >= n || b >= n) throw ParseError(epath.string(), lineno, "node index out of range");
      s.adjacency(a, b) = 1;
    }
    if (f > 0) {
      const auto apath = dir / step_name("attrs", t);
      auto ain = open_input(apath);
      Eigen::Index row = 0;
      lineno = 0;
      while (std::getline(ain, line)) {
        ++lineno;
        auto tok = tokenize(line);
        if (tok.empty()) continue;
        if (static_cast<Eigen::Index>(tok.size()) != f || row >= n) {
          throw ShapeError(apath.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(n) + " rows of " +
                           std::to_string(f) + " values");
        }
        for (Eigen::Index k = 0; k < f; ++k) {
          if (!parse_double(tok[static_cast<std::size_t>(k)], s.attributes(row, k))) {
            throw ParseError(apath.string(), lineno, "not a number: '" + tok[static_cast<std::size_t>(k)] + "'");
          }
        }
        ++row;
      }
      if (row != n) throw ShapeError(apath.string() + ": expected " + std::to_string(n) + " rows, got " + std::to_string(row));
    }
    snaps.push_back(std::move(s));
  }
  TemporalGraph g = make_graph(std::move(snaps), f, std::move(labels), false);
  g.scaler.enabled = standardized;
  if (static_cast<Eigen::Index>(mean.size()) == f && static_cast<Eigen::Index>(sd.size()) == f) {
    g.scaler.mean = Eigen::Map<const RowVector>(mean.data(), f);
    g.scaler.stddev = Eigen::Map<const RowVector>(sd.data(), f);
  } else if (standardized) {
    g.scaler = AttributeScaler::fit(g.snapshots, f, true);
  }
  return g;
}

}  // namespace dyngen
