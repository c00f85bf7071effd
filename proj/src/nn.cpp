#include "dyngen/nn.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace dyngen {

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  // Row-major fill so the draw order does not depend on Eigen's storage order.
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

ag::Var ParameterSet::create(const std::string& name, Eigen::Index rows, Eigen::Index cols, Init init, Rng& rng,
                             double scale) {
  if (params_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  Matrix value;
  switch (init) {
    case Init::Zero:
      value = Matrix::Zero(rows, cols);
      break;
    case Init::Normal:
      value = standard_normal(rows, cols, rng) * scale;
      break;
    case Init::Glorot: {
      const double limit = scale * std::sqrt(6.0 / static_cast<double>(rows + cols));
      std::uniform_real_distribution<double> dist(-limit, limit);
      value.resize(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) value(i, j) = dist(rng);
      break;
    }
  }
  auto v = ag::parameter(std::move(value));
  params_.emplace(name, v);
  return v;
}

const ag::Var& ParameterSet::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

std::size_t ParameterSet::num_scalars() const {
  std::size_t n = 0;
  for (const auto& [_, v] : params_) n += static_cast<std::size_t>(v.value().size());
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& [_, v] : params_) v.zero_grad();
}

std::map<std::string, Matrix> ParameterSet::values() const {
  std::map<std::string, Matrix> out;
  for (const auto& [name, v] : params_) out.emplace(name, v.value());
  return out;
}

void ParameterSet::assign(const std::map<std::string, Matrix>& values) {
  if (values.size() != params_.size()) {
    throw std::invalid_argument("parameter count mismatch: expected " + std::to_string(params_.size()) + ", got " +
                                std::to_string(values.size()));
  }
  for (auto& [name, v] : params_) {
    auto it = values.find(name);
    if (it == values.end()) throw std::invalid_argument("missing parameter: " + name);
    if (it->second.rows() != v.rows() || it->second.cols() != v.cols()) {
      throw std::invalid_argument("shape mismatch for parameter " + name);
    }
    v.mutable_value() = it->second;
  }
}

bool ParameterSet::all_finite() const {
  for (const auto& [_, v] : params_)
    if (!v.value().allFinite()) return false;
  return true;
}

namespace {
constexpr char kMagic[4] = {'D', 'G', 'P', 'S'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated parameter file: " + path.string());
  return v;
}
}  // namespace

void ParameterSet::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(kMagic, 4);
  write_pod(out, kFormatVersion);
  write_pod(out, static_cast<std::uint32_t>(params_.size()));
  for (const auto& [name, v] : params_) {
    write_pod(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(out, static_cast<std::int64_t>(v.rows()));
    write_pod(out, static_cast<std::int64_t>(v.cols()));
    for (Eigen::Index i = 0; i < v.rows(); ++i)
      for (Eigen::Index j = 0; j < v.cols(); ++j) write_pod(out, v.value()(i, j));
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::map<std::string, Matrix> ParameterSet::load_values(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open parameter file: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != std::string(kMagic, 4)) {
    throw std::runtime_error("not a parameter file: " + path.string());
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kFormatVersion) {
    throw std::runtime_error("unsupported parameter file version " + std::to_string(version) + ": " + path.string());
  }
  const auto count = read_pod<std::uint32_t>(in, path);
  std::map<std::string, Matrix> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = read_pod<std::uint32_t>(in, path);
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto rows = read_pod<std::int64_t>(in, path);
    const auto cols = read_pod<std::int64_t>(in, path);
    if (rows < 0 || cols < 0) throw std::runtime_error("corrupt parameter shape in " + path.string());
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = read_pod<double>(in, path);
    out.emplace(std::move(name), std::move(m));
  }
  return out;
}

Dense Dense::create(ParameterSet& ps, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng,
                    bool with_bias) {
  Dense d;
  d.weight = ps.create(name + ".weight", in, out, ParameterSet::Init::Glorot, rng);
  if (with_bias) d.bias = ps.create(name + ".bias", 1, out, ParameterSet::Init::Zero, rng);
  return d;
}

ag::Var Dense::operator()(const ag::Var& x) const {
  auto y = ag::matmul(x, weight);
  return bias.defined() ? ag::add_row(y, bias) : y;
}

Mlp Mlp::create(ParameterSet& ps, const std::string& name, const std::vector<Eigen::Index>& dims, Rng& rng) {
  if (dims.size() < 2) throw std::invalid_argument("Mlp needs at least input and output dims: " + name);
  Mlp m;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    m.layers.push_back(Dense::create(ps, name + "." + std::to_string(i), dims[i], dims[i + 1], rng));
  }
  return m;
}

ag::Var Mlp::operator()(const ag::Var& x) const {
  ag::Var h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    if (i + 1 < layers.size()) h = ag::leaky_relu(h, slope);
  }
  return h;
}

void Adam::step(ParameterSet& ps) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (const auto& [name, p] : ps.entries()) {
    if (!p.has_grad()) continue;
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.size() == 0) {
      m = Matrix::Zero(p.rows(), p.cols());
      v = Matrix::Zero(p.rows(), p.cols());
    }
    const Matrix& g = p.grad();
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    Matrix update = (m / bc1).array() / ((v / bc2).array().sqrt() + cfg_.epsilon);
    ag::Var handle = p;
    handle.mutable_value() -= cfg_.learning_rate * update;
  }
}

double clip_grad_norm(ParameterSet& ps, double max_norm) {
  double sq = 0.0;
  for (const auto& [_, p] : ps.entries())
    if (p.has_grad()) sq += p.grad().squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (const auto& [_, p] : ps.entries()) {
      if (p.has_grad()) p.node()->grad *= factor;
    }
  }
  return norm;
}

double PlateauSchedule::observe(double loss, double lr) {
  if (!std::isfinite(best_) || loss < best_ - threshold_ * std::abs(best_)) {
    best_ = loss;
    bad_epochs_ = 0;
    return lr;
  }
  if (++bad_epochs_ > patience_) {
    bad_epochs_ = 0;
    return std::max(min_lr_, lr * factor_);
  }
  return lr;
}

}  // namespace dyngen
