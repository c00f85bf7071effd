#include "dyngen/recurrence.hpp"

#include "dyngen/error.hpp"

namespace dyngen {

TimeVecParams TimeVecParams::create(ParameterSet& ps, const std::string& prefix, Eigen::Index dim, Rng& rng) {
  if (dim < 1) throw ConfigError("time vector dimension must be positive");
  TimeVecParams p;
  p.frequency = ps.create(prefix + ".frequency", 1, dim, ParameterSet::Init::Normal, rng, 0.5);
  p.phase = ps.create(prefix + ".phase", 1, dim, ParameterSet::Init::Normal, rng, 0.5);
  return p;
}

ag::Var time2vec(double t, const TimeVecParams& p) {
  auto lin = ag::add(ag::scale(p.frequency, t), p.phase);
  if (p.dim() == 1) return lin;
  return ag::concat_cols({ag::slice_cols(lin, 0, 1), ag::sin(ag::slice_cols(lin, 1, p.dim() - 1))});
}

RowVector time2vec_value(double t, const TimeVecParams& p) { return time2vec(t, p).value().row(0); }

RecurrenceParams RecurrenceParams::create(ParameterSet& ps, const std::string& prefix, const RecurrenceConfig& cfg,
                                          Rng& rng) {
  RecurrenceParams p;
  p.cfg = cfg;
  const auto dh = cfg.hidden_state;
  p.update_x = Dense::create(ps, prefix + ".update_x", cfg.input_dim, dh, rng);
  p.reset_x = Dense::create(ps, prefix + ".reset_x", cfg.input_dim, dh, rng);
  p.cand_x = Dense::create(ps, prefix + ".cand_x", cfg.input_dim, dh, rng);
  p.update_h = ps.create(prefix + ".update_h", dh, dh, ParameterSet::Init::Glorot, rng);
  p.reset_h = ps.create(prefix + ".reset_h", dh, dh, ParameterSet::Init::Glorot, rng);
  p.cand_h = ps.create(prefix + ".cand_h", dh, dh, ParameterSet::Init::Glorot, rng);
  return p;
}

ag::Var update_hidden(const ag::Var& enc, const ag::Var& z, const ag::Var& time_vec, const ag::Var& h_prev,
                      const RecurrenceParams& p) {
  const Eigen::Index n = h_prev.rows();
  if (enc.rows() != n || z.rows() != n || time_vec.rows() != 1 || h_prev.cols() != p.cfg.hidden_state) {
    throw ShapeError("update_hidden: row counts or hidden size disagree");
  }
  if (enc.cols() + z.cols() + time_vec.cols() != p.cfg.input_dim) {
    throw ShapeError("update_hidden: input width " + std::to_string(enc.cols() + z.cols() + time_vec.cols()) +
                     ", expected " + std::to_string(p.cfg.input_dim));
  }
  auto x = ag::concat_cols({enc, z, ag::broadcast_rows(time_vec, n)});
  auto u = ag::sigmoid(ag::add(p.update_x(x), ag::matmul(h_prev, p.update_h)));
  auto r = ag::sigmoid(ag::add(p.reset_x(x), ag::matmul(h_prev, p.reset_h)));
  auto c = ag::tanh(ag::add(p.cand_x(x), ag::matmul(ag::mul(r, h_prev), p.cand_h)));
  auto keep = ag::add_scalar(ag::scale(u, -1.0), 1.0);
  return ag::add(ag::mul(keep, h_prev), ag::mul(u, c));
}

Matrix update_hidden(const Matrix& enc, const Matrix& z, const RowVector& time_vec, const Matrix& h_prev,
                     const RecurrenceParams& p) {
  return update_hidden(ag::constant(enc), ag::constant(z), ag::constant(Matrix(time_vec)), ag::constant(h_prev), p)
      .value();
}

}  // namespace dyngen
