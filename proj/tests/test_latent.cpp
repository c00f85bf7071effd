#include "dyngen/error.hpp"
#include "dyngen/latent.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace dyngen;
namespace ag = dyngen::ag;

namespace {

SamplerParams make(ParameterSet& ps, Rng& rng, Eigen::Index dh = 4, Eigen::Index de = 3, Eigen::Index dz = 2) {
  auto p = SamplerParams::create(ps, "s", {dh, de, dz}, rng);
  // Random log-std heads so the oracles see non-trivial sigmas.
  p.prior_log_std.mutable_value() = standard_normal(dh, dz, rng) * 0.3;
  p.post_log_std.mutable_value() = standard_normal(dh, dz, rng) * 0.3;
  return p;
}

Matrix leaky(const Matrix& m) { return m.unaryExpr([](double v) { return v > 0 ? v : 0.01 * v; }); }

GaussianParams scalar_gaussian(double mean, double sd) {
  return {Matrix::Constant(1, 1, mean), Matrix::Constant(1, 1, sd)};
}

}  // namespace

TEST_CASE("zero weights give the standard normal") {
  ParameterSet ps;
  Rng rng(1);
  auto p = make(ps, rng);
  for (auto& [_, v] : ps.entries()) ag::Var(v).mutable_value().setZero();
  Matrix h = standard_normal(5, 4, rng), enc = standard_normal(5, 3, rng);
  for (const auto& g : {prior_params(h, p), posterior_params(enc, h, p)}) {
    CHECK(g.mean.isZero());
    CHECK(g.stddev.isApprox(Matrix::Ones(5, 2)));
  }
}

TEST_CASE("fresh samplers start with unit sigma") {
  ParameterSet ps;
  Rng rng(1);
  auto p = SamplerParams::create(ps, "s", {4, 3, 2}, rng);
  CHECK(prior_params(standard_normal(3, 4, rng), p).stddev.isApprox(Matrix::Ones(3, 2)));
}

TEST_CASE("prior is a row-wise closed form") {
  ParameterSet ps;
  Rng rng(2);
  auto p = make(ps, rng);
  Matrix h = standard_normal(6, 4, rng);
  h.row(3) = h.row(1);
  auto g = prior_params(h, p);
  CHECK(g.mean.row(3) == g.mean.row(1));
  CHECK(g.stddev.row(3) == g.stddev.row(1));
  for (Eigen::Index i = 0; i < 6; ++i) {
    Matrix act = leaky(h.row(i) * p.prior_hidden.value());
    Matrix mu = act * p.prior_mean.value();
    Matrix sd = (act * p.prior_log_std.value()).array().exp();
    CHECK((g.mean.row(i) - mu).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((g.stddev.row(i) - sd).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("posterior is a row-wise closed form over [enc | h]") {
  ParameterSet ps;
  Rng rng(3);
  auto p = make(ps, rng);
  Matrix h = standard_normal(5, 4, rng), enc = standard_normal(5, 3, rng);
  auto g = posterior_params(enc, h, p);
  for (Eigen::Index i = 0; i < 5; ++i) {
    Matrix joint(1, 7);
    joint << enc.row(i), h.row(i);
    Matrix act = leaky(joint * p.post_hidden.value());
    CHECK((g.mean.row(i) - act * p.post_mean.value()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((g.stddev.row(i) - Matrix((act * p.post_log_std.value()).array().exp())).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("posterior that ignores the encoding and copies the prior has zero KL") {
  ParameterSet ps;
  Rng rng(4);
  auto p = make(ps, rng);
  Matrix w = Matrix::Zero(7, 4);
  w.bottomRows(4) = p.prior_hidden.value();
  p.post_hidden.mutable_value() = w;
  p.post_mean.mutable_value() = p.prior_mean.value();
  p.post_log_std.mutable_value() = p.prior_log_std.value();
  Matrix h = standard_normal(5, 4, rng), enc = standard_normal(5, 3, rng);
  CHECK(kl_divergence(posterior_params(enc, h, p), prior_params(h, p)) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("sampling") {
  Rng rng(5);
  GaussianParams g{standard_normal(3, 2, rng), Matrix::Constant(3, 2, 0.7)};
  SUBCASE("zero noise returns the mean") { CHECK(sample(g, Matrix::Zero(3, 2)) == g.mean); }
  SUBCASE("standard normal returns the noise") {
    Matrix noise = standard_normal(3, 2, rng);
    CHECK(sample(GaussianParams{Matrix::Zero(3, 2), Matrix::Ones(3, 2)}, noise) == noise);
  }
  SUBCASE("noise shape is checked") { CHECK_THROWS_AS(sample(g, Matrix::Zero(2, 2)), ShapeError); }
}

TEST_CASE("10^5 reparameterised draws recover mean and std within 1%") {
  const double mu = 3.0, sd = 1.5;
  Rng rng(6);
  const Matrix noise = standard_normal(100000, 1, rng);
  const Matrix z = sample(GaussianParams{Matrix::Constant(100000, 1, mu), Matrix::Constant(100000, 1, sd)}, noise);
  const double m = z.mean();
  const double s = std::sqrt((z.array() - m).square().mean());
  CHECK(std::abs(m - mu) / mu < 0.01);
  CHECK(std::abs(s - sd) / sd < 0.01);
}

TEST_CASE("closed-form KL") {
  CHECK(kl_divergence(scalar_gaussian(0.3, 1.2), scalar_gaussian(0.3, 1.2)) == 0.0);
  CHECK(kl_divergence(scalar_gaussian(1, 1), scalar_gaussian(0, 1)) == doctest::Approx(0.5).epsilon(1e-12));
  const double want = 0.5 * (4.0 - 1.0) - std::log(2.0);
  CHECK(kl_divergence(scalar_gaussian(0, 2), scalar_gaussian(0, 1)) == doctest::Approx(want).epsilon(1e-12));
  CHECK(want == doctest::Approx(0.80685).epsilon(1e-5));
}

TEST_CASE("KL agrees with a 10^6-sample Monte-Carlo estimate within 2%") {
  Rng rng(7);
  std::normal_distribution<double> nd(0.0, 1.0);
  const double sq = 2.0;
  double acc = 0.0;
  const int draws = 1000000;
  for (int k = 0; k < draws; ++k) {
    const double x = sq * nd(rng);
    // log q(x) - log p(x) for q = N(0, 2^2), p = N(0, 1)
    acc += -std::log(sq) - 0.5 * x * x / (sq * sq) + 0.5 * x * x;
  }
  const double mc = acc / draws;
  const double exact = kl_divergence(scalar_gaussian(0, 2), scalar_gaussian(0, 1));
  CHECK(std::abs(mc - exact) / exact < 0.02);
}

TEST_CASE("KL is non-negative and sums over nodes and dimensions") {
  Rng rng(8);
  for (int rep = 0; rep < 50; ++rep) {
    GaussianParams q{standard_normal(4, 3, rng), standard_normal(4, 3, rng).array().exp()};
    GaussianParams p{standard_normal(4, 3, rng), standard_normal(4, 3, rng).array().exp()};
    const double kl = kl_divergence(q, p);
    CHECK(kl >= 0.0);
    double loop = 0.0;
    for (Eigen::Index i = 0; i < 4; ++i)
      for (Eigen::Index j = 0; j < 3; ++j) {
        const double sq = q.stddev(i, j), sp = p.stddev(i, j), dm = q.mean(i, j) - p.mean(i, j);
        loop += std::log(sp / sq) + (sq * sq + dm * dm) / (2 * sp * sp) - 0.5;
      }
    CHECK(kl == doctest::Approx(loop).epsilon(1e-10));
  }
}

TEST_CASE("reparameterisation gradient: identity in the mean, the noise in sigma") {
  ParameterSet ps;
  Rng rng(9);
  auto mean = ps.create("mean", 3, 2, ParameterSet::Init::Normal, rng);
  auto log_std = ps.create("log_std", 3, 2, ParameterSet::Init::Normal, rng, 0.3);
  Matrix noise = standard_normal(3, 2, rng);
  GaussianVars g{mean, log_std, ag::exp(log_std)};
  ag::backward(ag::sum(sample(g, noise)));
  CHECK(mean.grad().isApprox(Matrix::Ones(3, 2)));
  // d sample / d sigma = noise, so d / d log_std = noise * sigma.
  CHECK((log_std.grad() - Matrix(noise.cwiseProduct(g.stddev.value()))).cwiseAbs().maxCoeff() < 1e-12);
  Matrix w = standard_normal(3, 2, rng);
  auto r = oracle::check_gradients(ps, [&] {
    GaussianVars gv{mean, log_std, ag::exp(log_std)};
    return ag::sum(ag::mul(sample(gv, noise), ag::constant(w)));
  });
  CHECK(r.max_rel < 1e-6);
}

TEST_CASE("sampler gradients including KL match central differences") {
  ParameterSet ps;
  Rng rng(10);
  auto p = make(ps, rng);
  Matrix h = standard_normal(5, 4, rng), enc = standard_normal(5, 3, rng), noise = standard_normal(5, 2, rng);
  auto r = oracle::check_gradients(ps, [&] {
    auto q = posterior(ag::constant(enc), ag::constant(h), p);
    auto pr = prior(ag::constant(h), p);
    return ag::add(kl_divergence(q, pr), ag::sum(ag::square(sample(q, noise))));
  });
  INFO(r.worst);
  CHECK(r.max_rel < 1e-4);
}

TEST_CASE("permuting node rows permutes every output") {
  ParameterSet ps;
  Rng rng(11);
  auto p = make(ps, rng);
  Matrix h = standard_normal(4, 4, rng), enc = standard_normal(4, 3, rng);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(4);
  perm.indices() << 2, 0, 3, 1;
  auto a = posterior_params(enc, h, p);
  auto b = posterior_params(perm * enc, perm * h, p);
  CHECK((perm * a.mean - b.mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((perm * a.stddev - b.stddev).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("log-std is clamped to [-10, 10]") {
  ParameterSet ps;
  Rng rng(12);
  auto p = make(ps, rng);
  p.prior_log_std.mutable_value().setConstant(1e3);
  Matrix h = Matrix::Ones(2, 4);
  p.prior_hidden.mutable_value() = Matrix::Identity(4, 4);
  auto g = prior_params(h, p);
  CHECK(g.stddev.maxCoeff() == doctest::Approx(std::exp(10.0)));
}

TEST_CASE("posterior evaluations are counted") {
  ParameterSet ps;
  Rng rng(13);
  auto p = make(ps, rng);
  const auto before = posterior_evaluations();
  posterior_params(Matrix::Zero(2, 3), Matrix::Zero(2, 4), p);
  prior_params(Matrix::Zero(2, 4), p);
  CHECK(posterior_evaluations() == before + 1);
}

TEST_CASE("shape errors") {
  ParameterSet ps;
  Rng rng(14);
  auto p = make(ps, rng);
  CHECK_THROWS_AS(prior_params(Matrix::Zero(2, 3), p), ShapeError);
  CHECK_THROWS_AS(posterior_params(Matrix::Zero(2, 3), Matrix::Zero(3, 4), p), ShapeError);
  CHECK_THROWS_AS(kl_divergence(scalar_gaussian(0, 1), GaussianParams{Matrix::Zero(2, 1), Matrix::Ones(2, 1)}),
                  ShapeError);
}
