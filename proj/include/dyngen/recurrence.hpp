#pragma once

// Learned time vectorisation and the gated recurrent update of per-node
// hidden states.

#include "dyngen/nn.hpp"

namespace dyngen {

struct TimeVecParams {
  ag::Var frequency;  // 1 x d_T
  ag::Var phase;      // 1 x d_T

  static TimeVecParams create(ParameterSet& ps, const std::string& prefix, Eigen::Index dim, Rng& rng);
  Eigen::Index dim() const { return frequency.cols(); }
};

/// Component 0 is linear in t; components r >= 1 are sin(w_r t + phi_r). t is 1-based.
ag::Var time2vec(double t, const TimeVecParams& p);
RowVector time2vec_value(double t, const TimeVecParams& p);

struct RecurrenceConfig {
  Eigen::Index input_dim = 40;     // d_eps + d_z + d_T
  Eigen::Index hidden_state = 16;  // d_h
};

/// Gated recurrent cell: h' = (1 - u) * h + u * c, so a closed update gate keeps h.
struct RecurrenceParams {
  RecurrenceConfig cfg;
  Dense update_x, reset_x, cand_x;  // input -> d_h, with bias
  ag::Var update_h, reset_h, cand_h;  // d_h x d_h

  static RecurrenceParams create(ParameterSet& ps, const std::string& prefix, const RecurrenceConfig& cfg, Rng& rng);
};

/// Concatenates [enc | z | time vector broadcast to every row] and applies the cell.
ag::Var update_hidden(const ag::Var& enc, const ag::Var& z, const ag::Var& time_vec, const ag::Var& h_prev,
                      const RecurrenceParams& p);
Matrix update_hidden(const Matrix& enc, const Matrix& z, const RowVector& time_vec, const Matrix& h_prev,
                     const RecurrenceParams& p);

}  // namespace dyngen
