#include "dyngen/error.hpp"
#include "dyngen/recurrence.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace dyngen;
namespace ag = dyngen::ag;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

RecurrenceParams cell(ParameterSet& ps, Rng& rng, Eigen::Index in = 7, Eigen::Index dh = 4) {
  RecurrenceConfig c;
  c.input_dim = in;
  c.hidden_state = dh;
  return RecurrenceParams::create(ps, "r", c, rng);
}

}  // namespace

TEST_CASE("time vector examples") {
  ParameterSet ps;
  Rng rng(1);
  auto p = TimeVecParams::create(ps, "tv", 3, rng);
  p.frequency.mutable_value() << 1.0, 0.5, 2.0;
  p.phase.mutable_value() << 1.0, M_PI / 2 - 1.0, 0.0;
  RowVector v = time2vec_value(2.0, p);
  CHECK(v(0) == doctest::Approx(3.0));
  CHECK(std::sin(0.5 * 2.0 + M_PI / 2 - 1.0) == doctest::Approx(1.0));
  CHECK(v(1) == doctest::Approx(1.0));
  CHECK(v(2) == doctest::Approx(std::sin(4.0)));
}

TEST_CASE("time vector matches its formula for random parameters") {
  ParameterSet ps;
  Rng rng(2);
  auto p = TimeVecParams::create(ps, "tv", 6, rng);
  for (double t : {1.0, 2.0, 5.0, 17.0}) {
    RowVector v = time2vec_value(t, p);
    for (Eigen::Index r = 0; r < 6; ++r) {
      const double lin = p.frequency.value()(0, r) * t + p.phase.value()(0, r);
      CHECK(v(r) == doctest::Approx(r == 0 ? lin : std::sin(lin)));
    }
  }
}

TEST_CASE("closed update gate keeps the hidden state") {
  ParameterSet ps;
  Rng rng(3);
  auto p = cell(ps, rng);
  p.update_x.bias.mutable_value().setConstant(-20.0);
  p.update_x.weight.mutable_value().setZero();
  p.update_h.mutable_value().setZero();
  Matrix h = standard_normal(5, 4, rng);
  Matrix out = update_hidden(standard_normal(5, 3, rng), standard_normal(5, 2, rng), standard_normal(1, 2, rng), h, p);
  CHECK((out - h).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("identical rows stay identical") {
  ParameterSet ps;
  Rng rng(4);
  auto p = cell(ps, rng);
  auto rep = [&](Eigen::Index c) { return Matrix(Matrix::Ones(6, 1) * standard_normal(1, c, rng)); };
  Matrix out = update_hidden(rep(3), rep(2), standard_normal(1, 2, rng), rep(4), p);
  for (Eigen::Index i = 1; i < 6; ++i) CHECK((out.row(i) - out.row(0)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("gated update matches an elementwise oracle") {
  ParameterSet ps;
  Rng rng(5);
  auto p = cell(ps, rng);
  for (auto* d : {&p.update_x, &p.reset_x, &p.cand_x}) d->bias.mutable_value() = standard_normal(1, 4, rng);
  Matrix enc = standard_normal(3, 3, rng), z = standard_normal(3, 2, rng), h = standard_normal(3, 4, rng);
  RowVector tv = standard_normal(1, 2, rng);
  Matrix out = update_hidden(enc, z, tv, h, p);
  auto affine = [](const Dense& d, const RowVector& x, Eigen::Index k) {
    double s = d.bias.value()(0, k);
    for (Eigen::Index q = 0; q < x.size(); ++q) s += x(q) * d.weight.value()(q, k);
    return s;
  };
  auto hmul = [](const RowVector& x, const ag::Var& w, Eigen::Index k) {
    double s = 0;
    for (Eigen::Index q = 0; q < x.size(); ++q) s += x(q) * w.value()(q, k);
    return s;
  };
  for (Eigen::Index i = 0; i < 3; ++i) {
    RowVector x(7);
    x << enc.row(i), z.row(i), tv;
    RowVector hi = h.row(i), r(4);
    for (Eigen::Index k = 0; k < 4; ++k) r(k) = sigmoid(affine(p.reset_x, x, k) + hmul(hi, p.reset_h, k));
    RowVector rh = r.cwiseProduct(hi);
    for (Eigen::Index k = 0; k < 4; ++k) {
      const double u = sigmoid(affine(p.update_x, x, k) + hmul(hi, p.update_h, k));
      const double c = std::tanh(affine(p.cand_x, x, k) + hmul(rh, p.cand_h, k));
      CHECK(out(i, k) == doctest::Approx((1 - u) * hi(k) + u * c).epsilon(1e-12));
    }
  }
}

TEST_CASE("value and differentiable paths agree") {
  ParameterSet ps;
  Rng rng(6);
  auto p = cell(ps, rng);
  Matrix enc = standard_normal(4, 3, rng), z = standard_normal(4, 2, rng), h = standard_normal(4, 4, rng);
  RowVector tv = standard_normal(1, 2, rng);
  Matrix a = update_hidden(enc, z, tv, h, p);
  Matrix b = update_hidden(ag::constant(enc), ag::constant(z), ag::constant(Matrix(tv)), ag::constant(h), p).value();
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("input width mismatch is a shape error") {
  ParameterSet ps;
  Rng rng(7);
  auto p = cell(ps, rng);
  CHECK_THROWS_AS(update_hidden(Matrix::Zero(2, 3), Matrix::Zero(2, 3), RowVector::Zero(2), Matrix::Zero(2, 4), p),
                  ShapeError);
  CHECK_THROWS_AS(update_hidden(Matrix::Zero(2, 3), Matrix::Zero(2, 2), RowVector::Zero(2), Matrix::Zero(3, 4), p),
                  ShapeError);
}

TEST_CASE("recurrence and time vector gradients match central differences") {
  ParameterSet ps;
  Rng rng(8);
  auto p = cell(ps, rng);
  auto tv = TimeVecParams::create(ps, "tv", 2, rng);
  Matrix enc = standard_normal(4, 3, rng), z = standard_normal(4, 2, rng), h = standard_normal(4, 4, rng);
  Matrix w = standard_normal(4, 4, rng);
  auto g = oracle::check_gradients(ps, [&] {
    ag::Var h1 = update_hidden(ag::constant(enc), ag::constant(z), time2vec(1.0, tv), ag::constant(h), p);
    ag::Var h2 = update_hidden(ag::constant(enc), ag::constant(z), time2vec(2.0, tv), h1, p);
    return ag::sum(ag::mul(h2, ag::constant(w)));
  });
  INFO(g.worst);
  CHECK(g.max_rel < 1e-4);
}
