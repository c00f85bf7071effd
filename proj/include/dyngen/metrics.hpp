#pragma once

// Evaluation suite for generated sequences: kernel MMD over degree and
// clustering distributions, scalar statistics compared by average
// percentage discrepancy, attribute divergences, Spearman correlation error,
// and consecutive-snapshot difference series.

#include "dyngen/graph_store.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>

namespace dyngen {

struct MmdConfig {
  double bandwidth = 1.0;   // Gaussian kernel sigma
  int clustering_bins = 100;  // histogram over [0, 1]
};

/// Plug-in MMD^2 with a Gaussian kernel, floored at 0. Throws on an empty sample.
double mmd(const std::vector<Vector>& p, const std::vector<Vector>& q, const MmdConfig& cfg = {});
double mmd(const std::vector<double>& p, const std::vector<double>& q, const MmdConfig& cfg = {});

struct DegreeSequences {
  std::vector<int> in;
  std::vector<int> out;
};
DegreeSequences degree_sequences(const Adjacency& a);

/// Undirected projection: i ~ j iff a[i][j] or a[j][i].
std::vector<std::vector<Eigen::Index>> undirected_neighbors(const Adjacency& a);
std::vector<int> undirected_degrees(const Adjacency& a);

Vector clustering_coefficients(const Adjacency& a);
Vector clustering_histogram(const Vector& coefficients, int bins);

/// Continuous power-law MLE over degrees >= x_min (zeros never count). With
/// correction the denominator uses ln(x / (x_min - 1/2)), otherwise ln(x / x_min).
double ple(const std::vector<int>& degrees, int x_min = 1, bool corrected = true);

long long wedge_count(const Adjacency& a);

struct Components {
  int count = 0;
  int largest = 0;
};
/// Weakly connected components.
Components components(const Adjacency& a);

/// k-core number of every node in the undirected projection.
std::vector<int> coreness(const Adjacency& a);

struct Discrepancy {
  double value = 0.0;
  int excluded = 0;  // steps with a zero (or undefined) original value
};
/// Mean over t of |orig_t - gen_t| / |orig_t|.
Discrepancy avg_discrepancy(const std::vector<double>& orig, const std::vector<double>& gen);

double jsd(const std::vector<double>& p, const std::vector<double>& q, int bins = 50);
/// 1-D earth mover's distance: integral of |F_p - F_q|.
double emd(const std::vector<double>& p, const std::vector<double>& q);

struct AttrDivergence {
  double jsd = 0.0;
  double emd = 0.0;
};
/// Per attribute dimension, averaged over dimensions.
AttrDivergence attr_divergences(const Matrix& x_orig, const Matrix& x_gen, int bins = 50);

/// Spearman rank correlation with average ranks for ties; nullopt when either side is constant.
std::optional<double> spearman(const Vector& a, const Vector& b);

struct SpearmanError {
  double value = 0.0;
  int excluded = 0;
  bool pairwise_average = false;  // F > 2: averaged over all attribute pairs
};
/// nullopt when F < 2.
std::optional<SpearmanError> spearman_error(const TemporalGraph& orig, const TemporalGraph& gen);

struct DiffSeries {
  std::vector<double> degree;
  std::vector<double> clustering;
  std::vector<double> coreness;
  std::vector<double> attr_mae;
  std::vector<double> attr_rmse;
};
DiffSeries diff_series(const TemporalGraph& g);
nlohmann::ordered_json to_json(const DiffSeries& d);

struct MetricReport {
  double in_deg_mmd = 0.0;
  double out_deg_mmd = 0.0;
  double clus_mmd = 0.0;
  double in_ple_err = 0.0;
  double out_ple_err = 0.0;
  double wedge_err = 0.0;
  double nc_err = 0.0;
  double lcc_err = 0.0;
  double attr_jsd = 0.0;
  double attr_emd = 0.0;
  std::optional<double> spearman_err;
  bool spearman_pairwise = false;
  /// Steps excluded from the percentage-discrepancy averages because the original was zero or undefined.
  std::map<std::string, int> excluded_steps;
  DiffSeries diff_orig;
  DiffSeries diff_gen;

  nlohmann::ordered_json to_json() const;
};

MetricReport evaluate(const TemporalGraph& orig, const TemporalGraph& gen, const MmdConfig& cfg = {});

}  // namespace dyngen
