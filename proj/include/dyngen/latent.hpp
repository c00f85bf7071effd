#pragma once

// Per-node diagonal Gaussian prior p(Z_t | H_{t-1}) and posterior
// q(Z_t | G_t, H_{t-1}), reparameterized sampling, and closed-form KL.

#include "dyngen/nn.hpp"

#include <cstdint>

namespace dyngen {

struct GaussianParams {
  Matrix mean;    // N x d_z
  Matrix stddev;  // N x d_z, strictly positive
};

/// Differentiable view; stddev = exp(log_std) with log_std clamped to [-10, 10].
struct GaussianVars {
  ag::Var mean;
  ag::Var log_std;
  ag::Var stddev;

  GaussianParams values() const { return {mean.value(), stddev.value()}; }
};

struct SamplerConfig {
  Eigen::Index hidden_state = 16;  // d_h
  Eigen::Index encoding = 16;      // d_eps
  Eigen::Index latent = 16;        // d_z
};

struct SamplerParams {
  SamplerConfig cfg;
  ag::Var prior_hidden;    // d_h x d_h
  ag::Var prior_mean;      // d_h x d_z
  ag::Var prior_log_std;   // d_h x d_z
  ag::Var post_hidden;     // (d_eps + d_h) x d_h, rows ordered [enc | h_prev]
  ag::Var post_mean;       // d_h x d_z
  ag::Var post_log_std;    // d_h x d_z

  static SamplerParams create(ParameterSet& ps, const std::string& prefix, const SamplerConfig& cfg, Rng& rng);
};

inline constexpr double kLogStdBound = 10.0;

GaussianVars prior(const ag::Var& h_prev, const SamplerParams& params);
GaussianVars posterior(const ag::Var& enc, const ag::Var& h_prev, const SamplerParams& params);

GaussianParams prior_params(const Matrix& h_prev, const SamplerParams& params);
GaussianParams posterior_params(const Matrix& enc, const Matrix& h_prev, const SamplerParams& params);

/// mean + noise * stddev.
ag::Var sample(const GaussianVars& g, const Matrix& noise);
Matrix sample(const GaussianParams& g, const Matrix& noise);

/// Sum over nodes and dimensions of KL(q || p) between diagonal Gaussians.
ag::Var kl_divergence(const GaussianVars& q, const GaussianVars& p);
double kl_divergence(const GaussianParams& q, const GaussianParams& p);

/// Number of posterior network evaluations since process start.
std::uint64_t posterior_evaluations();

}  // namespace dyngen
