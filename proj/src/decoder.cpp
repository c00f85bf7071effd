#include "dyngen/decoder.hpp"

#include "dyngen/error.hpp"

#include <algorithm>
#include <cmath>

namespace dyngen {
namespace {

constexpr double kThetaFloor = 1e-12;
constexpr double kAttentionSlope = 0.2;

void check_condition(const ag::Var& s, const DecoderParams& params) {
  if (s.cols() != params.cfg.condition_dim) {
    throw ShapeError("decoder: condition rows have " + std::to_string(s.cols()) + " columns, expected " +
                     std::to_string(params.cfg.condition_dim));
  }
}

double log_sum_exp(const Vector& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

}  // namespace

DecoderParams DecoderParams::create(ParameterSet& ps, const std::string& prefix, const DecoderConfig& cfg, Rng& rng) {
  if (cfg.mixture < 1 || cfg.hidden < 1 || cfg.condition_dim < 1 || cfg.gat_layers < 1 || cfg.gat_heads < 1) {
    throw ConfigError("decoder: mixture, hidden, condition_dim, gat_layers and gat_heads must be positive");
  }
  DecoderParams p;
  p.cfg = cfg;
  const auto ds = cfg.condition_dim;
  const auto d = cfg.hidden;
  if (cfg.use_mixture) {
    p.f_alpha = Mlp::create(ps, prefix + ".f_alpha", {ds, d, cfg.mixture}, rng);
    p.f_theta = Mlp::create(ps, prefix + ".f_theta", {ds, d, cfg.mixture}, rng);
  } else {
    p.inner_product = Dense::create(ps, prefix + ".inner_product", ds, d, rng, false);
    p.inner_bias = ps.create(prefix + ".inner_bias", 1, 1, ParameterSet::Init::Zero, rng);
  }
  if (cfg.attr_dim > 0) {
    Eigen::Index in = ds;
    if (cfg.use_graph_attr_decoder) {
      for (int l = 0; l < cfg.gat_layers; ++l) {
        const std::string tag = prefix + ".gat" + std::to_string(l);
        AttentionLayer layer;
        for (int h = 0; h < cfg.gat_heads; ++h) {
          const std::string head = tag + ".head" + std::to_string(h);
          layer.weight.push_back(ps.create(head + ".weight", in, d, ParameterSet::Init::Glorot, rng));
          layer.att_src.push_back(ps.create(head + ".att_src", d, 1, ParameterSet::Init::Glorot, rng));
          layer.att_dst.push_back(ps.create(head + ".att_dst", d, 1, ParameterSet::Init::Glorot, rng));
        }
        if (in != d) layer.residual = ps.create(tag + ".residual", in, d, ParameterSet::Init::Glorot, rng);
        p.gat.push_back(std::move(layer));
        in = d;
      }
    }
    p.attr_mlp = Mlp::create(ps, prefix + ".attr_mlp", {in, d, d, cfg.attr_dim}, rng);
  }
  return p;
}

MixtureParams MixtureParams::from_components(const Matrix& alpha, const std::vector<Matrix>& theta_k) {
  const Eigen::Index n = alpha.rows();
  const auto k = static_cast<Eigen::Index>(theta_k.size());
  if (alpha.cols() != k) throw ShapeError("mixture: alpha has " + std::to_string(alpha.cols()) + " components, theta " + std::to_string(k));
  MixtureParams m;
  m.alpha = alpha;
  m.theta = Matrix::Zero(n * n, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto& t = theta_k[static_cast<std::size_t>(c)];
    if (t.rows() != n || t.cols() != n) throw ShapeError("mixture: theta component is not N x N");
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) m.theta(i * n + j, c) = i == j ? 0.0 : t(i, j);
  }
  return m;
}

MixtureParams EdgeModelVars::values() const {
  MixtureParams m;
  m.alpha = log_alpha.value().array().exp();
  const Matrix& l = logits.value();
  const Eigen::Index n = m.alpha.rows();
  m.theta = l.unaryExpr([](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); });
  for (Eigen::Index i = 0; i < n; ++i) m.theta.row(i * n + i).setZero();
  return m;
}

EdgeModelVars edge_model(const ag::Var& condition, const DecoderParams& params) {
  check_condition(condition, params);
  const Eigen::Index n = condition.rows();
  EdgeModelVars out;
  if (params.cfg.use_mixture) {
    auto diffs = ag::pairwise_diff(condition);
    // Mean rather than sum over j: same function class (f_alpha ends in a
    // linear layer) but the logits no longer grow with N and saturate.
    out.log_alpha = ag::log_softmax_rows(ag::scale(ag::group_sum_rows(params.f_alpha(diffs), n), 1.0 / n));
    out.logits = params.f_theta(diffs);
  } else {
    auto u = params.inner_product(condition);
    auto scores = ag::reshape(ag::matmul(u, ag::transpose(u)), n * n, 1);
    out.logits = ag::add_row(scores, params.inner_bias);
    out.log_alpha = ag::constant(Matrix::Zero(n, 1));
  }
  return out;
}

MixtureParams mixture_params(const Matrix& condition, const DecoderParams& params) {
  return edge_model(ag::constant(condition), params).values();
}

ag::Var edge_log_likelihood(const EdgeModelVars& m, const Adjacency& a, const Matrix& weight) {
  if (a.rows() != m.log_alpha.rows()) throw ShapeError("edge_log_likelihood: adjacency size mismatch");
  auto per_component = ag::bernoulli_loglik(m.logits, a.cast<double>(), weight);
  return ag::logsumexp_rows(ag::add(m.log_alpha, per_component));
}

Vector edge_log_likelihood(const MixtureParams& m, const Adjacency& a) {
  const Eigen::Index n = m.num_nodes();
  const Eigen::Index k = m.num_components();
  if (a.rows() != n || a.cols() != n) throw ShapeError("edge_log_likelihood: adjacency size mismatch");
  Vector out(n);
  Vector terms(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < k; ++c) {
      double s = std::log(m.alpha(i, c));
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double th = std::clamp(m.theta_at(i, c, j), kThetaFloor, 1.0 - kThetaFloor);
        s += a(i, j) ? std::log(th) : std::log1p(-th);
      }
      terms(c) = s;
    }
    out(i) = log_sum_exp(terms);
  }
  return out;
}

Adjacency sample_adjacency(const MixtureParams& m, Rng& rng) {
  const Eigen::Index n = m.num_nodes();
  const Eigen::Index k = m.num_components();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Adjacency a = Adjacency::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = unif(rng);
    Eigen::Index comp = k - 1;
    double acc = 0.0;
    for (Eigen::Index c = 0; c < k; ++c) {
      acc += m.alpha(i, c);
      if (u < acc) {
        comp = c;
        break;
      }
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      const double draw = unif(rng);
      if (j != i && draw < m.theta_at(i, comp, j)) a(i, j) = 1;
    }
  }
  return a;
}

Adjacency threshold_adjacency(const MixtureParams& m, double threshold) {
  const Eigen::Index n = m.num_nodes();
  Adjacency a = Adjacency::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      double p = 0.0;
      for (Eigen::Index c = 0; c < m.num_components(); ++c) p += m.alpha(i, c) * m.theta_at(i, c, j);
      if (p > threshold) a(i, j) = 1;
    }
  }
  return a;
}

BoolMatrix attention_mask(const Adjacency& a) {
  BoolMatrix mask = (a.transpose().array() != 0).matrix();
  mask.diagonal().setConstant(true);
  return mask;
}

ag::Var decode_attributes(const ag::Var& condition, const Adjacency& a, const DecoderParams& params) {
  check_condition(condition, params);
  const Eigen::Index n = condition.rows();
  if (a.rows() != n || a.cols() != n) throw ShapeError("decode_attributes: adjacency size mismatch");
  if ((a.array() > 1).any() || (a.diagonal().array() != 0).any()) {
    throw ShapeError("decode_attributes: adjacency must be binary with zero diagonal");
  }
  if (params.cfg.attr_dim == 0) return ag::constant(Matrix::Zero(n, 0));

  ag::Var h = condition;
  if (params.cfg.use_graph_attr_decoder) {
    const BoolMatrix mask = attention_mask(a);
    for (const auto& layer : params.gat) {
      std::vector<ag::Var> heads;
      for (std::size_t k = 0; k < layer.weight.size(); ++k) {
        auto wh = ag::matmul(h, layer.weight[k]);
        auto scores = ag::leaky_relu(ag::outer_add(ag::matmul(wh, layer.att_dst[k]), ag::matmul(wh, layer.att_src[k])),
                                     kAttentionSlope);
        heads.push_back(ag::matmul(ag::masked_softmax_rows(scores, mask), wh));
      }
      ag::Var merged = heads.front();
      for (std::size_t k = 1; k < heads.size(); ++k) merged = ag::add(merged, heads[k]);
      merged = ag::scale(merged, 1.0 / static_cast<double>(heads.size()));
      auto skip = layer.residual.defined() ? ag::matmul(h, layer.residual) : h;
      h = ag::leaky_relu(ag::add(merged, skip));
    }
  }
  auto out = params.attr_mlp(h);
  switch (params.cfg.output) {
    case OutputActivation::Identity:
      return out;
    case OutputActivation::Relu:
      return ag::relu(out);
    case OutputActivation::Sigmoid:
      return ag::sigmoid(out);
  }
  return out;
}

Matrix decode_attributes(const Matrix& condition, const Adjacency& a, const DecoderParams& params) {
  return decode_attributes(ag::constant(condition), a, params).value();
}

}  // namespace dyngen
