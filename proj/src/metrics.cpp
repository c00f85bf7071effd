#include "dyngen/metrics.hpp"

#include "dyngen/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

namespace dyngen {
namespace {

double kernel(const Vector& a, const Vector& b, double sigma) {
  return std::exp(-(a - b).squaredNorm() / (2.0 * sigma * sigma));
}

double mean_kernel(const std::vector<Vector>& a, const std::vector<Vector>& b, double sigma) {
  double s = 0.0;
  for (const auto& x : a)
    for (const auto& y : b) s += kernel(x, y, sigma);
  return s / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

std::vector<Vector> as_points(const std::vector<double>& v) {
  std::vector<Vector> out;
  out.reserve(v.size());
  for (double x : v) out.push_back(Vector::Constant(1, x));
  return out;
}

template <typename T>
std::vector<double> to_double(const std::vector<T>& v) {
  return std::vector<double>(v.begin(), v.end());
}

std::vector<double> column(const Matrix& m, Eigen::Index c) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m(i, c);
  return out;
}

Vector average_ranks(const Vector& v) {
  const Eigen::Index n = v.size();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return v(a) < v(b); });
  Vector r(n);
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    while (j + 1 < n && v(idx[static_cast<std::size_t>(j + 1)]) == v(idx[static_cast<std::size_t>(i)])) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Eigen::Index k = i; k <= j; ++k) r(idx[static_cast<std::size_t>(k)]) = rank;
    i = j + 1;
  }
  return r;
}

void require_same_shape(const TemporalGraph& a, const TemporalGraph& b) {
  if (a.num_nodes != b.num_nodes || a.num_steps() != b.num_steps() || a.attr_dim != b.attr_dim) {
    throw ShapeError("evaluate: graphs differ in N/T/F (" + std::to_string(a.num_nodes) + "/" +
                     std::to_string(a.num_steps()) + "/" + std::to_string(a.attr_dim) + " vs " +
                     std::to_string(b.num_nodes) + "/" + std::to_string(b.num_steps()) + "/" +
                     std::to_string(b.attr_dim) + ")");
  }
}

double mean_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return a.empty() ? 0.0 : s / static_cast<double>(a.size());
}

}  // namespace

double mmd(const std::vector<Vector>& p, const std::vector<Vector>& q, const MmdConfig& cfg) {
  if (p.empty() || q.empty()) throw EmptyInputError("mmd: both samples must be non-empty");
  if (!(cfg.bandwidth > 0.0)) throw ConfigError("mmd: kernel bandwidth must be positive");
  const double v = mean_kernel(p, p, cfg.bandwidth) + mean_kernel(q, q, cfg.bandwidth) -
                   2.0 * mean_kernel(p, q, cfg.bandwidth);
  return std::max(0.0, v);
}

double mmd(const std::vector<double>& p, const std::vector<double>& q, const MmdConfig& cfg) {
  return mmd(as_points(p), as_points(q), cfg);
}

DegreeSequences degree_sequences(const Adjacency& a) {
  DegreeSequences d;
  d.in.assign(static_cast<std::size_t>(a.cols()), 0);
  d.out.assign(static_cast<std::size_t>(a.rows()), 0);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (a(i, j)) {
        ++d.out[static_cast<std::size_t>(i)];
        ++d.in[static_cast<std::size_t>(j)];
      }
    }
  }
  return d;
}

std::vector<std::vector<Eigen::Index>> undirected_neighbors(const Adjacency& a) {
  const Eigen::Index n = a.rows();
  std::vector<std::vector<Eigen::Index>> nb(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j && (a(i, j) || a(j, i))) nb[static_cast<std::size_t>(i)].push_back(j);
  return nb;
}

std::vector<int> undirected_degrees(const Adjacency& a) {
  auto nb = undirected_neighbors(a);
  std::vector<int> d;
  d.reserve(nb.size());
  for (const auto& v : nb) d.push_back(static_cast<int>(v.size()));
  return d;
}

Vector clustering_coefficients(const Adjacency& a) {
  const Eigen::Index n = a.rows();
  auto nb = undirected_neighbors(a);
  auto linked = [&](Eigen::Index u, Eigen::Index v) { return a(u, v) || a(v, u); };
  Vector c = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& v = nb[static_cast<std::size_t>(i)];
    const auto d = static_cast<double>(v.size());
    if (v.size() < 2) continue;
    double links = 0.0;
    for (std::size_t x = 0; x < v.size(); ++x)
      for (std::size_t y = x + 1; y < v.size(); ++y) links += linked(v[x], v[y]) ? 1.0 : 0.0;
    c(i) = links / (d * (d - 1.0) / 2.0);
  }
  return c;
}

Vector clustering_histogram(const Vector& coefficients, int bins) {
  if (bins < 1) throw ConfigError("clustering histogram needs at least one bin");
  Vector h = Vector::Zero(bins);
  for (Eigen::Index i = 0; i < coefficients.size(); ++i) {
    auto b = static_cast<Eigen::Index>(std::floor(coefficients(i) * bins));
    h(std::clamp<Eigen::Index>(b, 0, bins - 1)) += 1.0;
  }
  if (coefficients.size() > 0) h /= static_cast<double>(coefficients.size());
  return h;
}

double ple(const std::vector<int>& degrees, int x_min, bool corrected) {
  if (x_min < 1) throw std::invalid_argument("ple: x_min must be >= 1");
  const double base = corrected ? x_min - 0.5 : static_cast<double>(x_min);
  double denom = 0.0;
  int n = 0;
  for (int d : degrees) {
    if (d < x_min || d <= 0) continue;
    denom += std::log(static_cast<double>(d) / base);
    ++n;
  }
  if (n == 0) throw UndefinedMetricError("ple: no degree >= x_min=" + std::to_string(x_min));
  if (!(denom > 0.0)) throw UndefinedMetricError("ple: degenerate degree sample (all degrees equal x_min)");
  return 1.0 + n / denom;
}

long long wedge_count(const Adjacency& a) {
  long long w = 0;
  for (int d : undirected_degrees(a)) w += static_cast<long long>(d) * (d - 1) / 2;
  return w;
}

Components components(const Adjacency& a) {
  const Eigen::Index n = a.rows();
  // Union-find over the undirected projection.
  std::vector<Eigen::Index> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](Eigen::Index x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      auto& p = parent[static_cast<std::size_t>(x)];
      p = parent[static_cast<std::size_t>(p)];
      x = p;
    }
    return x;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (a(i, j)) {
        auto ri = find(i), rj = find(j);
        if (ri != rj) parent[static_cast<std::size_t>(ri)] = rj;
      }
    }
  }
  std::vector<int> size(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) ++size[static_cast<std::size_t>(find(i))];
  Components c;
  for (int s : size) {
    if (s > 0) {
      ++c.count;
      c.largest = std::max(c.largest, s);
    }
  }
  return c;
}

std::vector<int> coreness(const Adjacency& a) {
  auto nb = undirected_neighbors(a);
  const auto n = nb.size();
  std::vector<int> deg(n), core(n, 0);
  std::vector<bool> removed(n, false);
  using Item = std::pair<int, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  for (std::size_t i = 0; i < n; ++i) {
    deg[i] = static_cast<int>(nb[i].size());
    pq.emplace(deg[i], i);
  }
  int k = 0;
  while (!pq.empty()) {
    auto [d, v] = pq.top();
    pq.pop();
    if (removed[v] || d != deg[v]) continue;
    k = std::max(k, d);
    core[v] = k;
    removed[v] = true;
    for (auto u : nb[v]) {
      const auto uu = static_cast<std::size_t>(u);
      if (!removed[uu]) pq.emplace(--deg[uu], uu);
    }
  }
  return core;
}

Discrepancy avg_discrepancy(const std::vector<double>& orig, const std::vector<double>& gen) {
  if (orig.size() != gen.size()) throw ShapeError("avg_discrepancy: sequences differ in length");
  Discrepancy d;
  double s = 0.0;
  int used = 0;
  for (std::size_t t = 0; t < orig.size(); ++t) {
    if (orig[t] == 0.0 || !std::isfinite(orig[t]) || !std::isfinite(gen[t])) {
      ++d.excluded;
      continue;
    }
    s += std::abs(orig[t] - gen[t]) / std::abs(orig[t]);
    ++used;
  }
  d.value = used ? s / used : 0.0;
  return d;
}

double jsd(const std::vector<double>& p, const std::vector<double>& q, int bins) {
  if (p.empty() || q.empty()) throw EmptyInputError("jsd: both samples must be non-empty");
  const auto [pmin, pmax] = std::minmax_element(p.begin(), p.end());
  const auto [qmin, qmax] = std::minmax_element(q.begin(), q.end());
  const double lo = std::min(*pmin, *qmin);
  const double hi = std::max(*pmax, *qmax);
  if (hi == lo) return 0.0;
  auto hist = [&](const std::vector<double>& v) {
    Vector h = Vector::Zero(bins);
    for (double x : v) {
      auto b = static_cast<Eigen::Index>(std::floor((x - lo) / (hi - lo) * bins));
      h(std::clamp<Eigen::Index>(b, 0, bins - 1)) += 1.0;
    }
    return Vector(h / static_cast<double>(v.size()));
  };
  const Vector hp = hist(p);
  const Vector hq = hist(q);
  double s = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double m = 0.5 * (hp(b) + hq(b));
    if (hp(b) > 0.0) s += 0.5 * hp(b) * std::log2(hp(b) / m);
    if (hq(b) > 0.0) s += 0.5 * hq(b) * std::log2(hq(b) / m);
  }
  return std::clamp(s, 0.0, 1.0);
}

double emd(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.empty() || q.empty()) throw EmptyInputError("emd: both samples must be non-empty");
  std::vector<double> a = p, b = q;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<double> pts;
  pts.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(pts));
  double total = 0.0;
  std::size_t ia = 0, ib = 0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    while (ia < a.size() && a[ia] <= pts[k]) ++ia;
    while (ib < b.size() && b[ib] <= pts[k]) ++ib;
    const double fa = static_cast<double>(ia) / static_cast<double>(a.size());
    const double fb = static_cast<double>(ib) / static_cast<double>(b.size());
    total += std::abs(fa - fb) * (pts[k + 1] - pts[k]);
  }
  return total;
}

AttrDivergence attr_divergences(const Matrix& x_orig, const Matrix& x_gen, int bins) {
  if (x_orig.cols() != x_gen.cols()) throw ShapeError("attr_divergences: attribute widths differ");
  AttrDivergence d;
  const Eigen::Index f = x_orig.cols();
  if (f == 0) return d;
  for (Eigen::Index c = 0; c < f; ++c) {
    const auto a = column(x_orig, c);
    const auto b = column(x_gen, c);
    d.jsd += jsd(a, b, bins);
    d.emd += emd(a, b);
  }
  d.jsd /= static_cast<double>(f);
  d.emd /= static_cast<double>(f);
  return d;
}

std::optional<double> spearman(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("spearman: length mismatch");
  if (a.size() < 2) return std::nullopt;
  const Vector ra = average_ranks(a);
  const Vector rb = average_ranks(b);
  const Vector ca = ra.array() - ra.mean();
  const Vector cb = rb.array() - rb.mean();
  const double va = ca.squaredNorm();
  const double vb = cb.squaredNorm();
  if (va == 0.0 || vb == 0.0) return std::nullopt;
  return ca.dot(cb) / std::sqrt(va * vb);
}

std::optional<SpearmanError> spearman_error(const TemporalGraph& orig, const TemporalGraph& gen) {
  require_same_shape(orig, gen);
  const Eigen::Index f = orig.attr_dim;
  if (f < 2) return std::nullopt;
  SpearmanError out;
  out.pairwise_average = f > 2;
  double total = 0.0;
  int used = 0;
  for (Eigen::Index t = 1; t <= orig.num_steps(); ++t) {
    const Matrix& xo = orig.at(t).attributes;
    const Matrix& xg = gen.at(t).attributes;
    double s = 0.0;
    int pairs = 0;
    bool excluded = false;
    for (Eigen::Index a = 0; a < f && !excluded; ++a) {
      for (Eigen::Index b = a + 1; b < f; ++b) {
        auto ro = spearman(xo.col(a), xo.col(b));
        auto rg = spearman(xg.col(a), xg.col(b));
        if (!ro || !rg) {
          excluded = true;
          break;
        }
        s += std::abs(*ro - *rg);
        ++pairs;
      }
    }
    if (excluded) {
      ++out.excluded;
      continue;
    }
    total += s / pairs;
    ++used;
  }
  out.value = used ? total / used : 0.0;
  return out;
}

DiffSeries diff_series(const TemporalGraph& g) {
  if (g.num_steps() < 2) throw ShapeError("diff_series: needs at least two snapshots");
  DiffSeries d;
  const auto n = static_cast<double>(g.num_nodes);
  for (Eigen::Index t = 1; t < g.num_steps(); ++t) {
    const auto& a = g.at(t);
    const auto& b = g.at(t + 1);
    d.degree.push_back(mean_abs_diff(to_double(undirected_degrees(a.adjacency)), to_double(undirected_degrees(b.adjacency))));
    const Vector ca = clustering_coefficients(a.adjacency);
    const Vector cb = clustering_coefficients(b.adjacency);
    d.clustering.push_back((ca - cb).cwiseAbs().sum() / n);
    d.coreness.push_back(mean_abs_diff(to_double(coreness(a.adjacency)), to_double(coreness(b.adjacency))));
    if (g.attr_dim == 0) {
      d.attr_mae.push_back(0.0);
      d.attr_rmse.push_back(0.0);
      continue;
    }
    const Matrix diff = b.attributes - a.attributes;
    double mae = 0.0, rmse = 0.0;
    for (Eigen::Index c = 0; c < g.attr_dim; ++c) {
      mae += diff.col(c).cwiseAbs().sum() / n;
      rmse += std::sqrt(diff.col(c).squaredNorm() / n);
    }
    d.attr_mae.push_back(mae / static_cast<double>(g.attr_dim));
    d.attr_rmse.push_back(rmse / static_cast<double>(g.attr_dim));
  }
  return d;
}

nlohmann::ordered_json to_json(const DiffSeries& d) {
  nlohmann::ordered_json j;
  j["degree"] = d.degree;
  j["clustering"] = d.clustering;
  j["coreness"] = d.coreness;
  j["attr_mae"] = d.attr_mae;
  j["attr_rmse"] = d.attr_rmse;
  return j;
}

nlohmann::ordered_json MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["in_deg_mmd"] = in_deg_mmd;
  j["out_deg_mmd"] = out_deg_mmd;
  j["clus_mmd"] = clus_mmd;
  j["in_ple_err"] = in_ple_err;
  j["out_ple_err"] = out_ple_err;
  j["wedge_err"] = wedge_err;
  j["nc_err"] = nc_err;
  j["lcc_err"] = lcc_err;
  j["attr_jsd"] = attr_jsd;
  j["attr_emd"] = attr_emd;
  j["spearman_err"] = spearman_err ? nlohmann::ordered_json(*spearman_err) : nlohmann::ordered_json();
  j["spearman_pairwise_average"] = spearman_pairwise;
  j["excluded_steps"] = excluded_steps;
  j["diff_series"] = {{"orig", dyngen::to_json(diff_orig)}, {"gen", dyngen::to_json(diff_gen)}};
  return j;
}

MetricReport evaluate(const TemporalGraph& orig, const TemporalGraph& gen, const MmdConfig& cfg) {
  require_same_shape(orig, gen);
  const Eigen::Index steps = orig.num_steps();
  MetricReport r;
  std::vector<double> ple_in_o, ple_in_g, ple_out_o, ple_out_g, wedge_o, wedge_g, nc_o, nc_g, lcc_o, lcc_g;
  auto safe_ple = [](const std::vector<int>& d) {
    try {
      return ple(d);
    } catch (const UndefinedMetricError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  for (Eigen::Index t = 1; t <= steps; ++t) {
    const auto& ao = orig.at(t).adjacency;
    const auto& ag = gen.at(t).adjacency;
    const auto dego = degree_sequences(ao);
    const auto degg = degree_sequences(ag);
    r.in_deg_mmd += mmd(to_double(dego.in), to_double(degg.in), cfg);
    r.out_deg_mmd += mmd(to_double(dego.out), to_double(degg.out), cfg);
    r.clus_mmd += mmd(std::vector<Vector>{clustering_histogram(clustering_coefficients(ao), cfg.clustering_bins)},
                      std::vector<Vector>{clustering_histogram(clustering_coefficients(ag), cfg.clustering_bins)}, cfg);
    ple_in_o.push_back(safe_ple(dego.in));
    ple_in_g.push_back(safe_ple(degg.in));
    ple_out_o.push_back(safe_ple(dego.out));
    ple_out_g.push_back(safe_ple(degg.out));
    wedge_o.push_back(static_cast<double>(wedge_count(ao)));
    wedge_g.push_back(static_cast<double>(wedge_count(ag)));
    const auto co = components(ao);
    const auto cg = components(ag);
    nc_o.push_back(co.count);
    nc_g.push_back(cg.count);
    lcc_o.push_back(co.largest);
    lcc_g.push_back(cg.largest);
    const auto div = attr_divergences(orig.at(t).attributes, gen.at(t).attributes);
    r.attr_jsd += div.jsd;
    r.attr_emd += div.emd;
  }
  const auto ts = static_cast<double>(steps);
  r.in_deg_mmd /= ts;
  r.out_deg_mmd /= ts;
  r.clus_mmd /= ts;
  r.attr_jsd /= ts;
  r.attr_emd /= ts;

  auto discrepancy = [&](const char* key, const std::vector<double>& o, const std::vector<double>& g) {
    const auto d = avg_discrepancy(o, g);
    r.excluded_steps[key] = d.excluded;
    return d.value;
  };
  r.in_ple_err = discrepancy("in_ple_err", ple_in_o, ple_in_g);
  r.out_ple_err = discrepancy("out_ple_err", ple_out_o, ple_out_g);
  r.wedge_err = discrepancy("wedge_err", wedge_o, wedge_g);
  r.nc_err = discrepancy("nc_err", nc_o, nc_g);
  r.lcc_err = discrepancy("lcc_err", lcc_o, lcc_g);

  if (auto sp = spearman_error(orig, gen)) {
    r.spearman_err = sp->value;
    r.spearman_pairwise = sp->pairwise_average;
    r.excluded_steps["spearman_err"] = sp->excluded;
  }
  if (steps >= 2) {
    r.diff_orig = diff_series(orig);
    r.diff_gen = diff_series(gen);
  }
  return r;
}

}  // namespace dyngen
