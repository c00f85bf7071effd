#pragma once

// Minimal reverse-mode automatic differentiation over dense Eigen matrices.
//
// A Var is a shared handle to a node holding a value and (after backward) an
// accumulated gradient of the same shape. Operations build the graph eagerly;
// backward() walks it in reverse topological order from a 1x1 root.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <memory>
#include <vector>

namespace dyngen {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;
using SparseMatrix = Eigen::SparseMatrix<double>;

namespace ag {

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g) {
    if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
    grad += g;
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  void zero_grad() { node_->grad.resize(0, 0); }
  bool requires_grad() const { return node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double scalar() const { return node_->value(0, 0); }
  bool defined() const { return static_cast<bool>(node_); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Leaf that receives gradients.
Var parameter(Matrix value);
/// Leaf that never receives gradients.
Var constant(Matrix value);
/// Cuts the graph: returns a constant with the same value.
Var detach(const Var& v);

/// Seeds d(root)/d(root) = 1 and propagates; root must be 1x1.
void backward(const Var& root);

// Linear algebra and elementwise arithmetic.
Var matmul(const Var& a, const Var& b);
Var spmm(const SparseMatrix& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
/// a * s where s is a 1x1 Var.
Var scale_by(const Var& a, const Var& s);
/// Adds a 1 x c row to every row of a.
Var add_row(const Var& a, const Var& row);
Var broadcast_rows(const Var& row, Eigen::Index n);

// Pointwise nonlinearities.
Var leaky_relu(const Var& a, double slope = 0.01);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sin(const Var& a);
Var square(const Var& a);
Var pow_int(const Var& a, int k);
Var clamp(const Var& a, double lo, double hi);

// Shape manipulation and reductions.
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
/// Row-major reshape (entry order i*cols + j is preserved).
Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols);
Var sum(const Var& a);
Var mean(const Var& a);
Var row_sum(const Var& a);
Var logsumexp_rows(const Var& a);
Var log_softmax_rows(const Var& a);
/// Softmax over entries where mask is true; fully masked rows yield zeros.
Var masked_softmax_rows(const Var& a, const BoolMatrix& mask);

// Graph-specific kernels.

/// Rows (i*N + j) hold s_i - s_j.
Var pairwise_diff(const Var& s);
/// Sums consecutive blocks of `group` rows; output has rows/group rows.
Var group_sum_rows(const Var& a, Eigen::Index group);
/// N x N matrix with entry (i, j) = u_i + v_j for column vectors u, v.
Var outer_add(const Var& u, const Var& v);
/// Per-source, per-component Bernoulli log-likelihood from logits.
///
/// logits has N*N rows (row i*N + j) and K columns. Returns N x K with
/// out(i,k) = sum_{j != i} w_ij [a_ij log sig(l) + (1 - a_ij) log sig(-l)].
/// An empty weight matrix means unit weights.
Var bernoulli_loglik(const Var& logits, const Matrix& target, const Matrix& weight = Matrix());
/// Row-wise cosine similarity between constant x and y; zero-norm rows give 0.
Var row_cosine(const Matrix& x, const Var& y);

}  // namespace ag
}  // namespace dyngen
