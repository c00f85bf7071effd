#include "dyngen/encoder.hpp"

#include "dyngen/error.hpp"

namespace dyngen {

EncoderParams EncoderParams::create(ParameterSet& ps, const std::string& prefix, const EncoderConfig& cfg, Rng& rng) {
  if (cfg.layers < 1 || cfg.mlp_layers < 1 || cfg.hidden < 1 || cfg.out_dim < 1 || cfg.attr_dim < 0) {
    throw ConfigError("encoder: layers, mlp_layers, hidden and out_dim must be positive");
  }
  EncoderParams p;
  p.cfg = cfg;
  const Eigen::Index d = cfg.hidden;
  if (cfg.attr_dim > 0) {
    p.input = Dense::create(ps, prefix + ".input", cfg.attr_dim, d, rng);
  } else {
    p.constant_row = ps.create(prefix + ".constant_row", 1, d, ParameterSet::Init::Normal, rng, 0.1);
  }
  const std::vector<Eigen::Index> flow_dims(static_cast<std::size_t>(cfg.mlp_layers) + 1, d);
  for (int l = 1; l <= cfg.layers; ++l) {
    const std::string tag = prefix + ".layer" + std::to_string(l);
    p.f_in.push_back(Mlp::create(ps, tag + ".f_in", flow_dims, rng));
    p.eps_in.push_back(ps.create(tag + ".eps_in", 1, 1, ParameterSet::Init::Zero, rng));
    if (cfg.bidirectional) {
      p.f_out.push_back(Mlp::create(ps, tag + ".f_out", flow_dims, rng));
      p.eps_out.push_back(ps.create(tag + ".eps_out", 1, 1, ParameterSet::Init::Zero, rng));
    }
  }
  if (cfg.bidirectional) p.f_agg = Mlp::create(ps, prefix + ".f_agg", {2 * d, d}, rng);
  p.f_pool = Mlp::create(ps, prefix + ".f_pool", {cfg.layers * d, d, cfg.out_dim}, rng);
  return p;
}

NeighborOps::NeighborOps(const Adjacency& a, bool force_sparse) : n_(a.rows()) {
  if (a.rows() != a.cols()) throw ShapeError("adjacency must be square");
  if ((a.array() > 1).any()) throw ShapeError("adjacency must be binary");
  sparse_ = force_sparse || n_ > kSparseThreshold;
  Matrix dense = a.cast<double>();
  Matrix und = (dense + dense.transpose()).cwiseMin(1.0);
  if (n_ > 0) {
    mean_degree_ = dense.sum() / static_cast<double>(n_);
    mean_undirected_degree_ = und.sum() / static_cast<double>(n_);
  }
  if (sparse_) {
    sp_out_ = dense.sparseView();
    sp_in_ = SparseMatrix(sp_out_.transpose());
    sp_und_ = und.sparseView();
  } else {
    dense_in_ = ag::constant(dense.transpose());
    dense_out_ = ag::constant(dense);
    dense_und_ = ag::constant(und);
  }
}

ag::Var NeighborOps::in_sum(const ag::Var& h) const {
  return sparse_ ? ag::spmm(sp_in_, h) : ag::matmul(dense_in_, h);
}

ag::Var NeighborOps::out_sum(const ag::Var& h) const {
  return sparse_ ? ag::spmm(sp_out_, h) : ag::matmul(dense_out_, h);
}

ag::Var NeighborOps::undirected_sum(const ag::Var& h) const {
  return sparse_ ? ag::spmm(sp_und_, h) : ag::matmul(dense_und_, h);
}

ag::Var init_features(const ag::Var& x, const EncoderParams& params, Eigen::Index num_nodes) {
  if (x.rows() != num_nodes || x.cols() != params.cfg.attr_dim) {
    throw ShapeError("init_features: attributes are " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                     ", expected " + std::to_string(num_nodes) + "x" + std::to_string(params.cfg.attr_dim));
  }
  if (params.cfg.attr_dim == 0) return ag::broadcast_rows(params.constant_row, num_nodes);
  return params.input(x);
}

namespace {
ag::Var gin_input(const ag::Var& h, const ag::Var& eps, const ag::Var& neighbor_sum) {
  // (1 + eps) * h + sum of neighbours
  return ag::add(ag::add(h, ag::scale_by(h, eps)), neighbor_sum);
}
}  // namespace

FlowStates flow_states(const ag::Var& h, const NeighborOps& ops, int l, const EncoderParams& params) {
  if (l < 1 || l > params.cfg.layers) throw std::out_of_range("encoder layer index out of range: " + std::to_string(l));
  if (h.rows() != ops.num_nodes() || h.cols() != params.cfg.hidden) throw ShapeError("biflow_layer: state shape mismatch");
  const auto k = static_cast<std::size_t>(l - 1);
  auto scaled = [&](ag::Var sum, double degree) {
    return params.cfg.normalize_neighbors && degree > 1.0 ? ag::scale(sum, 1.0 / degree) : sum;
  };
  if (!params.cfg.bidirectional) {
    auto merged =
        params.f_in[k](gin_input(h, params.eps_in[k], scaled(ops.undirected_sum(h), ops.mean_undirected_degree())));
    return {merged, merged};
  }
  return {params.f_in[k](gin_input(h, params.eps_in[k], scaled(ops.in_sum(h), ops.mean_degree()))),
          params.f_out[k](gin_input(h, params.eps_out[k], scaled(ops.out_sum(h), ops.mean_degree())))};
}

ag::Var biflow_layer(const ag::Var& h, const NeighborOps& ops, int l, const EncoderParams& params) {
  auto flows = flow_states(h, ops, l, params);
  if (!params.cfg.bidirectional) return ag::leaky_relu(flows.in);
  return ag::leaky_relu(params.f_agg(ag::concat_cols({flows.in, flows.out})));
}

ag::Var encode(const NeighborOps& ops, const ag::Var& x, const EncoderParams& params) {
  ag::Var h = init_features(x, params, ops.num_nodes());
  std::vector<ag::Var> hops;
  hops.reserve(static_cast<std::size_t>(params.cfg.layers));
  for (int l = 1; l <= params.cfg.layers; ++l) {
    h = biflow_layer(h, ops, l, params);
    hops.push_back(h);
  }
  return params.f_pool(hops.size() == 1 ? hops.front() : ag::concat_cols(hops));
}

Matrix encode(const Adjacency& a, const Matrix& x, const EncoderParams& params) {
  return encode(NeighborOps(a), ag::constant(x), params).value();
}

}  // namespace dyngen
