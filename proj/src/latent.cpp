#include "dyngen/latent.hpp"

#include "dyngen/error.hpp"

#include <atomic>
#include <cmath>

namespace dyngen {
namespace {

std::atomic<std::uint64_t> g_posterior_calls{0};

GaussianVars heads(const ag::Var& hidden, const ag::Var& w_mean, const ag::Var& w_log_std) {
  auto act = ag::leaky_relu(hidden);
  GaussianVars g;
  g.mean = ag::matmul(act, w_mean);
  g.log_std = ag::clamp(ag::matmul(act, w_log_std), -kLogStdBound, kLogStdBound);
  g.stddev = ag::exp(g.log_std);
  return g;
}

GaussianVars from_values(const GaussianParams& g) {
  if (g.mean.rows() != g.stddev.rows() || g.mean.cols() != g.stddev.cols()) {
    throw ShapeError("Gaussian mean and stddev shapes differ");
  }
  if ((g.stddev.array() <= 0.0).any()) throw std::invalid_argument("Gaussian stddev must be strictly positive");
  GaussianVars v;
  v.mean = ag::constant(g.mean);
  v.stddev = ag::constant(g.stddev);
  v.log_std = ag::constant(g.stddev.array().log().matrix());
  return v;
}

}  // namespace

SamplerParams SamplerParams::create(ParameterSet& ps, const std::string& prefix, const SamplerConfig& cfg, Rng& rng) {
  SamplerParams p;
  p.cfg = cfg;
  const auto dh = cfg.hidden_state;
  const auto dz = cfg.latent;
  using Init = ParameterSet::Init;
  p.prior_hidden = ps.create(prefix + ".prior.hidden", dh, dh, Init::Glorot, rng);
  p.prior_mean = ps.create(prefix + ".prior.mean", dh, dz, Init::Glorot, rng);
  p.prior_log_std = ps.create(prefix + ".prior.log_std", dh, dz, Init::Zero, rng);
  p.post_hidden = ps.create(prefix + ".posterior.hidden", cfg.encoding + dh, dh, Init::Glorot, rng);
  p.post_mean = ps.create(prefix + ".posterior.mean", dh, dz, Init::Glorot, rng);
  p.post_log_std = ps.create(prefix + ".posterior.log_std", dh, dz, Init::Zero, rng);
  return p;
}

GaussianVars prior(const ag::Var& h_prev, const SamplerParams& params) {
  if (h_prev.cols() != params.cfg.hidden_state) {
    throw ShapeError("prior: hidden state has " + std::to_string(h_prev.cols()) + " columns, expected " +
                     std::to_string(params.cfg.hidden_state));
  }
  return heads(ag::matmul(h_prev, params.prior_hidden), params.prior_mean, params.prior_log_std);
}

GaussianVars posterior(const ag::Var& enc, const ag::Var& h_prev, const SamplerParams& params) {
  if (enc.cols() != params.cfg.encoding || h_prev.cols() != params.cfg.hidden_state || enc.rows() != h_prev.rows()) {
    throw ShapeError("posterior: encoding/hidden-state shape mismatch");
  }
  g_posterior_calls.fetch_add(1, std::memory_order_relaxed);
  auto joint = ag::concat_cols({enc, h_prev});
  return heads(ag::matmul(joint, params.post_hidden), params.post_mean, params.post_log_std);
}

GaussianParams prior_params(const Matrix& h_prev, const SamplerParams& params) {
  return prior(ag::constant(h_prev), params).values();
}

GaussianParams posterior_params(const Matrix& enc, const Matrix& h_prev, const SamplerParams& params) {
  return posterior(ag::constant(enc), ag::constant(h_prev), params).values();
}

ag::Var sample(const GaussianVars& g, const Matrix& noise) {
  return ag::add(g.mean, ag::mul(ag::constant(noise), g.stddev));
}

Matrix sample(const GaussianParams& g, const Matrix& noise) {
  if (noise.rows() != g.mean.rows() || noise.cols() != g.mean.cols()) throw ShapeError("sample: noise shape mismatch");
  return g.mean + noise.cwiseProduct(g.stddev);
}

ag::Var kl_divergence(const GaussianVars& q, const GaussianVars& p) {
  if (q.mean.rows() != p.mean.rows() || q.mean.cols() != p.mean.cols()) throw ShapeError("kl_divergence: shape mismatch");
  // log(sp/sq) + (sq^2 + (mq - mp)^2) / (2 sp^2) - 1/2
  auto log_ratio = ag::sum(ag::sub(p.log_std, q.log_std));
  auto var_ratio = ag::sum(ag::exp(ag::scale(ag::sub(q.log_std, p.log_std), 2.0)));
  auto mean_term = ag::sum(ag::mul(ag::square(ag::sub(q.mean, p.mean)), ag::exp(ag::scale(p.log_std, -2.0))));
  auto total = ag::add(log_ratio, ag::scale(ag::add(var_ratio, mean_term), 0.5));
  return ag::add_scalar(total, -0.5 * static_cast<double>(q.mean.value().size()));
}

double kl_divergence(const GaussianParams& q, const GaussianParams& p) {
  return std::max(0.0, kl_divergence(from_values(q), from_values(p)).scalar());
}

std::uint64_t posterior_evaluations() { return g_posterior_calls.load(std::memory_order_relaxed); }

}  // namespace dyngen
