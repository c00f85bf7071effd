#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner. Nothing here calls the library routine it checks.

#include "dyngen/graph_store.hpp"
#include "dyngen/nn.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using dyngen::Adjacency;
using dyngen::Matrix;

inline double rel_error(double analytic, double numeric, double floor = 1e-4) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheck {
  double max_rel = 0.0;
  std::string worst;  // parameter name and entry of the largest error
  std::size_t checked = 0;
};

/// Central differences over every entry of every parameter in ps against the
/// gradients left by one backward pass of f. f must be deterministic.
inline GradCheck check_gradients(dyngen::ParameterSet& ps, const std::function<dyngen::ag::Var()>& f,
                                 double h = 1e-5) {
  ps.zero_grad();
  dyngen::ag::backward(f());
  std::map<std::string, Matrix> analytic;
  for (const auto& [name, v] : ps.entries()) {
    analytic[name] = v.has_grad() ? v.grad() : Matrix::Zero(v.rows(), v.cols());
  }
  GradCheck out;
  for (const auto& [name, v] : ps.entries()) {
    dyngen::ag::Var var = v;
    for (Eigen::Index i = 0; i < var.rows(); ++i) {
      for (Eigen::Index j = 0; j < var.cols(); ++j) {
        const double orig = var.value()(i, j);
        var.mutable_value()(i, j) = orig + h;
        const double up = f().scalar();
        var.mutable_value()(i, j) = orig - h;
        const double down = f().scalar();
        var.mutable_value()(i, j) = orig;
        const double err = rel_error(analytic[name](i, j), (up - down) / (2 * h));
        ++out.checked;
        if (err > out.max_rel) {
          out.max_rel = err;
          out.worst = name + "(" + std::to_string(i) + "," + std::to_string(j) + ")";
        }
      }
    }
  }
  ps.zero_grad();
  return out;
}

inline Adjacency random_digraph(Eigen::Index n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution edge(p);
  Adjacency a = Adjacency::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j && edge(rng)) a(i, j) = 1;
  return a;
}

/// Random directed snapshots with Gaussian attributes, used as small fixtures.
inline dyngen::TemporalGraph random_sequence(Eigen::Index n, Eigen::Index steps, Eigen::Index f, double p,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::vector<dyngen::Snapshot> snaps;
  for (Eigen::Index t = 0; t < steps; ++t) {
    dyngen::Snapshot s;
    s.adjacency = random_digraph(n, p, rng);
    s.attributes = Matrix::NullaryExpr(n, f, [&] { return gauss(rng); });
    snaps.push_back(std::move(s));
  }
  return dyngen::make_graph(std::move(snaps), f);
}

inline bool linked(const Adjacency& a, Eigen::Index i, Eigen::Index j) { return i != j && (a(i, j) || a(j, i)); }

/// Paths u - c - w with u < w, by enumeration of all triples.
inline long long wedges(const Adjacency& a) {
  const Eigen::Index n = a.rows();
  long long count = 0;
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index u = 0; u < n; ++u)
      for (Eigen::Index w = u + 1; w < n; ++w)
        if (u != c && w != c && linked(a, u, c) && linked(a, w, c)) ++count;
  return count;
}

inline std::vector<double> clustering(const Adjacency& a) {
  const Eigen::Index n = a.rows();
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index c = 0; c < n; ++c) {
    long long pairs = 0, closed = 0;
    for (Eigen::Index u = 0; u < n; ++u)
      for (Eigen::Index w = u + 1; w < n; ++w)
        if (u != c && w != c && linked(a, u, c) && linked(a, w, c)) {
          ++pairs;
          if (linked(a, u, w)) ++closed;
        }
    if (pairs > 0) out[static_cast<std::size_t>(c)] = static_cast<double>(closed) / static_cast<double>(pairs);
  }
  return out;
}

struct Comp {
  int count = 0;
  int largest = 0;
};

/// Breadth-first search over the undirected projection.
inline Comp bfs_components(const Adjacency& a) {
  const Eigen::Index n = a.rows();
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  Comp c;
  for (Eigen::Index s = 0; s < n; ++s) {
    if (seen[static_cast<std::size_t>(s)]) continue;
    ++c.count;
    int size = 0;
    std::queue<Eigen::Index> q;
    q.push(s);
    seen[static_cast<std::size_t>(s)] = true;
    while (!q.empty()) {
      const auto u = q.front();
      q.pop();
      ++size;
      for (Eigen::Index v = 0; v < n; ++v) {
        if (!seen[static_cast<std::size_t>(v)] && linked(a, u, v)) {
          seen[static_cast<std::size_t>(v)] = true;
          q.push(v);
        }
      }
    }
    c.largest = std::max(c.largest, size);
  }
  return c;
}

/// Integral of |F_p - F_q| with each CDF evaluated by counting at every support point (quadratic time).
inline double emd_by_counting(const std::vector<double>& p, const std::vector<double>& q) {
  std::vector<double> pts(p);
  pts.insert(pts.end(), q.begin(), q.end());
  std::sort(pts.begin(), pts.end());
  auto cdf = [](const std::vector<double>& s, double x) {
    double c = 0;
    for (double v : s) c += v <= x ? 1.0 : 0.0;
    return c / static_cast<double>(s.size());
  };
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    total += std::abs(cdf(p, pts[k]) - cdf(q, pts[k])) * (pts[k + 1] - pts[k]);
  }
  return total;
}

/// Equal-size samples: the optimal 1-D coupling matches sorted order.
inline double emd_sorted_matching(std::vector<double> p, std::vector<double> q) {
  std::sort(p.begin(), p.end());
  std::sort(q.begin(), q.end());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return s / static_cast<double>(p.size());
}

/// Pearson correlation of average ranks.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (double w : v) {
        less += w < v[i];
        equal += w == v[i];
      }
      r[i] = less + (equal + 1.0) / 2.0;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) ma += ra[i] / n, mb += rb[i] / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace oracle
