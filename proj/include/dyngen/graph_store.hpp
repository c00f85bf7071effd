#pragma once

// Temporal graph data model: snapshot sequences over a fixed node set, their
// ingestion from timestamped edge lists, validation, and on-disk layout.

#include "dyngen/autograd.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dyngen {

/// Directed binary adjacency; entry (i, j) = 1 means an edge i -> j.
using Adjacency = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

struct Snapshot {
  Adjacency adjacency;
  Matrix attributes;  // N x F

  Eigen::Index num_nodes() const { return adjacency.rows(); }
  std::size_t num_edges() const;
};

/// Per-dimension z-score over the whole sequence. The graph always stores raw
/// attribute values; the scaler maps them to model space and back.
struct AttributeScaler {
  bool enabled = false;
  RowVector mean;
  RowVector stddev;

  static AttributeScaler fit(const std::vector<Snapshot>& snapshots, Eigen::Index attr_dim, bool enabled);
  Matrix transform(const Matrix& raw) const;
  Matrix inverse(const Matrix& scaled) const;
};

/// Sequence of T snapshots over N nodes with F attributes per node.
/// Use make_graph() to construct a validated instance.
struct TemporalGraph {
  Eigen::Index num_nodes = 0;
  Eigen::Index attr_dim = 0;
  std::vector<Snapshot> snapshots;
  /// External identifier of each node index; empty means "0".."N-1".
  std::vector<std::string> labels;
  AttributeScaler scaler;

  Eigen::Index num_steps() const { return static_cast<Eigen::Index>(snapshots.size()); }
  /// t is 1-based.
  const Snapshot& at(Eigen::Index t) const { return snapshots.at(static_cast<std::size_t>(t - 1)); }
  std::string label(Eigen::Index i) const;
};

/// Throws ShapeError listing violations when the result would be invalid.
TemporalGraph make_graph(std::vector<Snapshot> snapshots, Eigen::Index attr_dim, std::vector<std::string> labels = {},
                         bool standardize = false);

enum class AttributePolicy {
  CarryForward,  // last observed value; zeros before the first observation
  EventCounts,   // per-bin [out-events, in-events] from the raw edge events
};

struct IngestSpec {
  Eigen::Index num_bins = 1;
  AttributePolicy attribute_policy = AttributePolicy::CarryForward;
  /// Width of the zero-initialised attribute matrix under CarryForward.
  Eigen::Index attr_dim = 0;
  bool standardize = true;
};

struct IngestStats {
  std::size_t events = 0;
  std::size_t self_loops_dropped = 0;
  /// Events per bin before multi-edge collapse.
  std::vector<std::size_t> events_per_bin;
};

TemporalGraph ingest_edge_list(const std::filesystem::path& path, const IngestSpec& spec, IngestStats* stats = nullptr);

/// Populates attributes from long-format rows "label t v1 ... vF" (t is 1-based).
TemporalGraph ingest_attributes(const TemporalGraph& g, const std::filesystem::path& path);

/// Canonical directory layout: manifest.json, nodes.txt, and per step
/// edges_tNNNN.txt ("src dst" rows) plus attrs_tNNNN.txt (omitted when F = 0).
void write_graph(const TemporalGraph& g, const std::filesystem::path& dir);
TemporalGraph read_graph(const std::filesystem::path& dir);

struct Violation {
  Eigen::Index t = 0;  // 1-based snapshot index; 0 for graph-level rules
  std::string rule;
  std::string detail;

  std::string to_string() const;
};

std::vector<Violation> validate(const TemporalGraph& g);

}  // namespace dyngen
