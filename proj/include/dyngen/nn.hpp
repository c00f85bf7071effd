#pragma once

#include "dyngen/autograd.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace dyngen {

using Rng = std::mt19937_64;

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// Named collection of trainable arrays. Handles returned by create() alias the
/// stored nodes, so modules holding them see loads and optimizer updates.
class ParameterSet {
 public:
  enum class Init { Glorot, Zero, Normal };

  ag::Var create(const std::string& name, Eigen::Index rows, Eigen::Index cols, Init init, Rng& rng,
                 double scale = 1.0);

  const ag::Var& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  const std::map<std::string, ag::Var>& entries() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t num_scalars() const;

  void zero_grad();
  /// Deep copy of the values (fresh nodes).
  std::map<std::string, Matrix> values() const;
  /// Overwrites values in place; names and shapes must match exactly.
  void assign(const std::map<std::string, Matrix>& values);
  bool all_finite() const;

  void save(const std::filesystem::path& path) const;
  static std::map<std::string, Matrix> load_values(const std::filesystem::path& path);

  static constexpr std::uint32_t kFormatVersion = 1;

 private:
  std::map<std::string, ag::Var> params_;
};

/// Affine map x W + b with W stored in x out layout.
struct Dense {
  ag::Var weight;
  ag::Var bias;  // undefined when the layer has no bias

  static Dense create(ParameterSet& ps, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng,
                      bool with_bias = true);
  ag::Var operator()(const ag::Var& x) const;
  Eigen::Index in_dim() const { return weight.rows(); }
  Eigen::Index out_dim() const { return weight.cols(); }
};

/// Stack of Dense layers with leaky rectifiers between them; the last layer is linear.
struct Mlp {
  std::vector<Dense> layers;
  double slope = 0.01;

  /// dims = {in, hidden..., out}; needs at least two entries.
  static Mlp create(ParameterSet& ps, const std::string& name, const std::vector<Eigen::Index>& dims, Rng& rng);
  ag::Var operator()(const ag::Var& x) const;
  Eigen::Index in_dim() const { return layers.front().in_dim(); }
  Eigen::Index out_dim() const { return layers.back().out_dim(); }
};

struct AdamConfig {
  double learning_rate = 5e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}
  /// Applies one update using the gradients currently stored on each parameter.
  void step(ParameterSet& ps);
  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }
  double learning_rate() const { return cfg_.learning_rate; }

 private:
  AdamConfig cfg_;
  std::map<std::string, Matrix> m_;
  std::map<std::string, Matrix> v_;
  std::int64_t t_ = 0;
};

/// Rescales all gradients so their joint L2 norm is at most max_norm; returns the pre-clip norm.
double clip_grad_norm(ParameterSet& ps, double max_norm);

/// Halves the learning rate when the monitored loss stops improving.
class PlateauSchedule {
 public:
  PlateauSchedule(int patience, double factor, double min_lr, double threshold = 1e-4)
      : patience_(patience), factor_(factor), min_lr_(min_lr), threshold_(threshold) {}
  /// Returns the new learning rate.
  double observe(double loss, double lr);

 private:
  int patience_;
  double factor_;
  double min_lr_;
  double threshold_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

}  // namespace dyngen
