#include "dyngen/decoder.hpp"
#include "dyngen/error.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace dyngen;
namespace ag = dyngen::ag;

namespace {

DecoderConfig cfg(Eigen::Index ds, Eigen::Index f, Eigen::Index k) {
  DecoderConfig c;
  c.condition_dim = ds;
  c.attr_dim = f;
  c.mixture = k;
  c.hidden = 4;
  c.gat_layers = 3;
  c.gat_heads = 2;
  return c;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Matrix leaky(const Matrix& m, double slope) { return m.unaryExpr([slope](double v) { return v > 0 ? v : slope * v; }); }

Matrix row_mlp(const Mlp& f, const RowVector& x) { return f(ag::constant(Matrix(x))).value(); }

// Attention network evaluated node by node, then the output MLP.
Matrix decode_oracle(const Matrix& s, const Adjacency& a, const DecoderParams& p) {
  const Eigen::Index n = s.rows();
  Matrix h = s;
  for (const auto& layer : p.gat) {
    Matrix merged = Matrix::Zero(n, p.cfg.hidden);
    for (std::size_t k = 0; k < layer.weight.size(); ++k) {
      const Matrix wh = h * layer.weight[k].value();
      for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<Eigen::Index> nb{i};
        for (Eigen::Index j = 0; j < n; ++j)
          if (a(j, i)) nb.push_back(j);
        std::vector<double> e;
        double mx = -1e300;
        for (auto j : nb) {
          const double raw = (wh.row(i) * layer.att_dst[k].value())(0, 0) + (wh.row(j) * layer.att_src[k].value())(0, 0);
          e.push_back(raw > 0 ? raw : 0.2 * raw);
          mx = std::max(mx, e.back());
        }
        double z = 0;
        for (double& v : e) z += (v = std::exp(v - mx));
        for (std::size_t q = 0; q < nb.size(); ++q) merged.row(i) += e[q] / z * wh.row(nb[q]);
      }
    }
    merged /= static_cast<double>(layer.weight.size());
    const Matrix skip = layer.residual.defined() ? Matrix(h * layer.residual.value()) : h;
    h = leaky(merged + skip, 0.01);
  }
  return p.attr_mlp(ag::constant(h)).value();
}

}  // namespace

TEST_CASE("identical condition rows give uniform alpha and constant theta") {
  ParameterSet ps;
  Rng rng(1);
  auto p = DecoderParams::create(ps, "d", cfg(5, 0, 3), rng);
  Matrix s = Matrix::Ones(4, 1) * standard_normal(1, 5, rng);
  auto m = mixture_params(s, p);
  CHECK((m.alpha.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-12);
  for (Eigen::Index k = 0; k < 3; ++k) {
    const double ref = m.theta_at(0, k, 1);
    for (Eigen::Index i = 0; i < 4; ++i)
      for (Eigen::Index j = 0; j < 4; ++j) CHECK(m.theta_at(i, k, j) == (i == j ? 0.0 : ref));
  }
}

TEST_CASE("K = 1 gives alpha = 1") {
  ParameterSet ps;
  Rng rng(2);
  auto p = DecoderParams::create(ps, "d", cfg(3, 0, 1), rng);
  auto m = mixture_params(standard_normal(5, 3, rng), p);
  CHECK(m.alpha.isApprox(Matrix::Ones(5, 1)));
}

TEST_CASE("mixture parameters match a per-pair loop") {
  ParameterSet ps;
  Rng rng(3);
  auto p = DecoderParams::create(ps, "d", cfg(4, 0, 3), rng);
  const Eigen::Index n = 6;
  Matrix s = standard_normal(n, 4, rng);
  auto m = mixture_params(s, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    RowVector logits = RowVector::Zero(3);
    for (Eigen::Index j = 0; j < n; ++j) logits += row_mlp(p.f_alpha, s.row(i) - s.row(j)).row(0);
    logits /= static_cast<double>(n);
    RowVector alpha = (logits.array() - logits.maxCoeff()).exp();
    alpha /= alpha.sum();
    CHECK((m.alpha.row(i) - alpha).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(std::abs(m.alpha.row(i).sum() - 1.0) < 1e-6);
    for (Eigen::Index j = 0; j < n; ++j) {
      RowVector th = row_mlp(p.f_theta, s.row(i) - s.row(j)).row(0).unaryExpr([](double x) { return sigmoid(x); });
      for (Eigen::Index k = 0; k < 3; ++k) CHECK(std::abs(m.theta_at(i, k, j) - (i == j ? 0.0 : th(k))) < 1e-6);
    }
  }
}

TEST_CASE("edge log-likelihood") {
  SUBCASE("K = 1, theta = 0.5") {
    const Eigen::Index n = 7;
    auto m = MixtureParams::from_components(Matrix::Ones(n, 1), {Matrix::Constant(n, n, 0.5)});
    std::mt19937_64 grng(1);
    Vector ll = edge_log_likelihood(m, oracle::random_digraph(n, 0.3, grng));
    for (Eigen::Index i = 0; i < n; ++i) CHECK(ll(i) == doctest::Approx((n - 1) * std::log(0.5)));
  }
  SUBCASE("theta matching the adjacency gives about zero") {
    std::mt19937_64 grng(2);
    Adjacency a = oracle::random_digraph(6, 0.4, grng);
    Matrix th = a.cast<double>().unaryExpr([](double v) { return v > 0 ? 1 - 1e-7 : 1e-7; });
    auto m = MixtureParams::from_components(Matrix::Ones(6, 1), {th});
    CHECK(edge_log_likelihood(m, a).cwiseAbs().maxCoeff() < 1e-5);
  }
  SUBCASE("N = 5, K = 2 matches direct summation of mixture probabilities") {
    Rng rng(3);
    std::mt19937_64 grng(3);
    const Eigen::Index n = 5;
    Matrix alpha = standard_normal(n, 2, rng).array().exp();
    for (Eigen::Index i = 0; i < n; ++i) alpha.row(i) /= alpha.row(i).sum();
    std::vector<Matrix> th;
    for (int k = 0; k < 2; ++k) th.push_back(standard_normal(n, n, rng).unaryExpr([](double x) { return sigmoid(x); }));
    auto m = MixtureParams::from_components(alpha, th);
    Adjacency a = oracle::random_digraph(n, 0.5, grng);
    Vector ll = edge_log_likelihood(m, a);
    for (Eigen::Index i = 0; i < n; ++i) {
      double total = 0;
      for (int k = 0; k < 2; ++k) {
        double prod = alpha(i, k);
        for (Eigen::Index j = 0; j < n; ++j)
          if (j != i) prod *= a(i, j) ? th[k](i, j) : 1 - th[k](i, j);
        total += prod;
      }
      CHECK(ll(i) == doctest::Approx(std::log(total)).epsilon(1e-9));
    }
  }
}

TEST_CASE("differentiable edge model agrees with the value path") {
  ParameterSet ps;
  Rng rng(4);
  auto p = DecoderParams::create(ps, "d", cfg(4, 0, 3), rng);
  Matrix s = standard_normal(6, 4, rng);
  std::mt19937_64 grng(4);
  Adjacency a = oracle::random_digraph(6, 0.4, grng);
  auto vars = edge_model(ag::constant(s), p);
  Vector direct = edge_log_likelihood(mixture_params(s, p), a);
  CHECK((edge_log_likelihood(vars, a).value().col(0) - direct).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("sample_adjacency extremes") {
  Rng rng(5);
  const Eigen::Index n = 6;
  auto empty = MixtureParams::from_components(Matrix::Ones(n, 1), {Matrix::Zero(n, n)});
  CHECK(sample_adjacency(empty, rng).cast<int>().sum() == 0);
  auto full = MixtureParams::from_components(Matrix::Ones(n, 1), {Matrix::Constant(n, n, 1 - 1e-12)});
  Adjacency a = sample_adjacency(full, rng);
  CHECK(a.cast<int>().sum() == n * (n - 1));
  CHECK(a.diagonal().cast<int>().sum() == 0);
}

TEST_CASE("edge frequencies over 2000 seeds track theta = 0.3") {
  const Eigen::Index n = 50;
  auto m = MixtureParams::from_components(Matrix::Ones(n, 1), {Matrix::Constant(n, n, 0.3)});
  Matrix freq = Matrix::Zero(n, n);
  for (int seed = 0; seed < 2000; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    freq += sample_adjacency(m, rng).cast<double>();
  }
  freq /= 2000.0;
  double max_dev = 0, pooled = 0;
  int within = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    CHECK(freq(i, i) == 0.0);
    CHECK(std::abs(freq.row(i).sum() / (n - 1) - 0.3) < 0.03);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dev = std::abs(freq(i, j) - 0.3);
      max_dev = std::max(max_dev, dev);
      within += dev <= 0.03;
      pooled += freq(i, j);
    }
  }
  const double entries = static_cast<double>(n * (n - 1));
  MESSAGE("largest per-entry deviation " << max_dev << ", " << within << " of " << entries << " within 0.03");
  CHECK(std::abs(pooled / entries - 0.3) < 0.03);
  // Each entry is Binomial(2000, 0.3)/2000 with sd 0.0102, so 0.03 is a 2.9 sd band
  // and a handful of 2450 entries fall outside it by chance; 0.05 is 4.9 sd.
  CHECK(max_dev < 0.05);
  CHECK(within / entries >= 0.99);
}

TEST_CASE("component draws follow alpha") {
  const Eigen::Index n = 4;
  Matrix alpha(n, 2);
  alpha.setConstant(0.5);
  alpha.row(0) << 0.2, 0.8;
  auto m = MixtureParams::from_components(alpha, {Matrix::Zero(n, n), Matrix::Constant(n, n, 1 - 1e-12)});
  int full_rows = 0;
  const int draws = 20000;
  for (int s = 0; s < draws; ++s) {
    Rng rng(static_cast<std::uint64_t>(s));
    full_rows += sample_adjacency(m, rng).row(0).cast<int>().sum() == n - 1;
  }
  CHECK(static_cast<double>(full_rows) / draws == doctest::Approx(0.8).epsilon(0.02));
}

TEST_CASE("sampling is deterministic given the seed") {
  ParameterSet ps;
  Rng rng(6);
  auto p = DecoderParams::create(ps, "d", cfg(4, 0, 2), rng);
  auto m = mixture_params(standard_normal(8, 4, rng), p);
  Rng r1(99), r2(99);
  CHECK(sample_adjacency(m, r1) == sample_adjacency(m, r2));
}

TEST_CASE("threshold adjacency uses the expected edge probability") {
  const Eigen::Index n = 3;
  Matrix alpha(n, 2);
  alpha.setConstant(0.5);
  auto m = MixtureParams::from_components(alpha, {Matrix::Constant(n, n, 0.2), Matrix::Constant(n, n, 0.9)});
  CHECK(threshold_adjacency(m, 0.5).cast<int>().sum() == n * (n - 1));  // 0.55 > 0.5
  CHECK(threshold_adjacency(m, 0.6).cast<int>().sum() == 0);
}

TEST_CASE("attention mask admits in-neighbours and self") {
  Adjacency a = Adjacency::Zero(3, 3);
  a(0, 1) = 1;
  BoolMatrix m = attention_mask(a);
  CHECK(m(1, 0));
  CHECK_FALSE(m(0, 1));
  CHECK(m(2, 2));
  CHECK_FALSE(m(2, 0));
}

TEST_CASE("attribute decoder matches a node-by-node attention oracle") {
  ParameterSet ps;
  Rng rng(7);
  auto p = DecoderParams::create(ps, "d", cfg(5, 3, 2), rng);
  std::mt19937_64 grng(7);
  Adjacency a = oracle::random_digraph(8, 0.3, grng);
  Matrix s = standard_normal(8, 5, rng);
  CHECK((decode_attributes(s, a, p) - decode_oracle(s, a, p)).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(decode_attributes(s, a, p) == decode_attributes(s, a, p));
}

TEST_CASE("attribute decoder symmetries") {
  ParameterSet ps;
  Rng rng(8);
  auto p = DecoderParams::create(ps, "d", cfg(4, 2, 2), rng);
  SUBCASE("empty adjacency: each row depends only on its own condition") {
    Matrix s = standard_normal(5, 4, rng);
    Matrix base = decode_attributes(s, Adjacency::Zero(5, 5), p);
    Matrix s2 = s;
    s2.row(4).setConstant(3.0);
    Matrix moved = decode_attributes(s2, Adjacency::Zero(5, 5), p);
    CHECK((base.topRows(4) - moved.topRows(4)).cwiseAbs().maxCoeff() < 1e-12);
    Matrix single = decode_attributes(Matrix(s.row(2)), Adjacency::Zero(1, 1), p);
    CHECK((single - base.row(2)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("identical rows on a directed cycle give identical outputs") {
    Adjacency cycle = Adjacency::Zero(6, 6);
    for (int i = 0; i < 6; ++i) cycle(i, (i + 1) % 6) = 1;
    Matrix s = Matrix::Ones(6, 1) * standard_normal(1, 4, rng);
    Matrix x = decode_attributes(s, cycle, p);
    for (int i = 1; i < 6; ++i) CHECK((x.row(i) - x.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("self-loops are rejected") {
    Adjacency bad = Adjacency::Zero(3, 3);
    bad(1, 1) = 1;
    CHECK_THROWS_AS(decode_attributes(standard_normal(3, 4, rng), bad, p), ShapeError);
  }
}

TEST_CASE("output nonlinearities") {
  for (auto act : {OutputActivation::Relu, OutputActivation::Sigmoid}) {
    ParameterSet ps;
    Rng rng(9);
    DecoderConfig c = cfg(4, 3, 2);
    c.output = act;
    auto p = DecoderParams::create(ps, "d", c, rng);
    Matrix x = decode_attributes(standard_normal(6, 4, rng) * 3.0, Adjacency::Zero(6, 6), p);
    CHECK(x.minCoeff() >= 0.0);
    if (act == OutputActivation::Sigmoid) CHECK(x.maxCoeff() <= 1.0);
  }
}

TEST_CASE("inner-product edge head") {
  ParameterSet ps;
  Rng rng(10);
  DecoderConfig c = cfg(4, 0, 3);
  c.use_mixture = false;
  auto p = DecoderParams::create(ps, "d", c, rng);
  p.inner_bias.mutable_value()(0, 0) = -0.4;
  Matrix s = standard_normal(5, 4, rng);
  auto m = mixture_params(s, p);
  CHECK(m.num_components() == 1);
  CHECK(m.alpha.isApprox(Matrix::Ones(5, 1)));
  Matrix u = s * p.inner_product.weight.value();
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = 0; j < 5; ++j)
      CHECK(m.theta_at(i, 0, j) == doctest::Approx(i == j ? 0.0 : sigmoid(u.row(i).dot(u.row(j)) - 0.4)));
}

TEST_CASE("MLP attribute head when graph attention is disabled") {
  ParameterSet ps;
  Rng rng(11);
  DecoderConfig c = cfg(4, 2, 2);
  c.use_graph_attr_decoder = false;
  auto p = DecoderParams::create(ps, "d", c, rng);
  CHECK(p.gat.empty());
  Matrix s = standard_normal(4, 4, rng);
  std::mt19937_64 grng(1);
  CHECK(decode_attributes(s, oracle::random_digraph(4, 0.5, grng), p) == p.attr_mlp(ag::constant(s)).value());
}

TEST_CASE("decoder gradients match central differences") {
  ParameterSet ps;
  Rng rng(12);
  auto p = DecoderParams::create(ps, "d", cfg(4, 2, 2), rng);
  // Zero biases put the diagonal pairs (s_i - s_i = 0) on the leaky-ReLU kink,
  // where central differences are meaningless; move every parameter off it.
  for (const auto& [name, v] : ps.entries()) {
    ag::Var var = v;
    var.mutable_value() += 0.1 * standard_normal(var.rows(), var.cols(), rng);
  }
  std::mt19937_64 grng(12);
  Adjacency a = oracle::random_digraph(5, 0.4, grng);
  Matrix s = standard_normal(5, 4, rng), w = standard_normal(5, 2, rng);
  auto edge = oracle::check_gradients(ps, [&] { return ag::sum(edge_log_likelihood(edge_model(ag::constant(s), p), a)); });
  INFO("edge " << edge.worst);
  CHECK(edge.max_rel < 1e-4);
  auto attr = oracle::check_gradients(ps, [&] {
    return ag::sum(ag::mul(decode_attributes(ag::constant(s), a, p), ag::constant(w)));
  });
  INFO("attr " << attr.worst);
  CHECK(attr.max_rel < 1e-4);
}
