#include "dyngen/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace dyngen::ag {
namespace {

using NodePtr = std::shared_ptr<Node>;

Var make(Matrix value, std::vector<Var> inputs, std::function<void(Node&)> bw) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto& in : inputs) {
    if (in.requires_grad()) {
      n->requires_grad = true;
      break;
    }
  }
  if (n->requires_grad) {
    n->parents.reserve(inputs.size());
    for (const auto& in : inputs) n->parents.push_back(in.node());
    n->backward = std::move(bw);
  }
  return Var(std::move(n));
}

void push(const NodePtr& p, const Matrix& g) {
  if (p->requires_grad) p->accumulate(g);
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

double log_sigmoid(double x) { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var parameter(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

Var constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var detach(const Var& v) { return constant(v.value()); }

void backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1) throw std::invalid_argument("backward: root must be a 1x1 scalar");
  if (!root.requires_grad()) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) {
      n->backward(*n);
      // Interior gradients are no longer needed once propagated.
      if (!n->parents.empty()) n->grad.resize(0, 0);
    }
  }
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()) + ")");
  }
  return make(a.value() * b.value(), {a, b}, [pa = a.node(), pb = b.node()](Node& self) {
    if (pa->requires_grad) pa->accumulate(self.grad * pb->value.transpose());
    if (pb->requires_grad) pb->accumulate(pa->value.transpose() * self.grad);
  });
}

Var spmm(const SparseMatrix& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("spmm: inner dimensions differ");
  Matrix out = a * b.value();
  return make(std::move(out), {b}, [a, pb = b.node()](Node& self) { push(pb, a.transpose() * self.grad); });
}

Var transpose(const Var& a) {
  return make(a.value().transpose(), {a}, [pa = a.node()](Node& self) { push(pa, self.grad.transpose()); });
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  return make(a.value() + b.value(), {a, b}, [pa = a.node(), pb = b.node()](Node& self) {
    push(pa, self.grad);
    push(pb, self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  return make(a.value() - b.value(), {a, b}, [pa = a.node(), pb = b.node()](Node& self) {
    push(pa, self.grad);
    if (pb->requires_grad) pb->accumulate(-self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  return make(a.value().cwiseProduct(b.value()), {a, b}, [pa = a.node(), pb = b.node()](Node& self) {
    if (pa->requires_grad) pa->accumulate(self.grad.cwiseProduct(pb->value));
    if (pb->requires_grad) pb->accumulate(self.grad.cwiseProduct(pa->value));
  });
}

Var scale(const Var& a, double c) {
  return make(a.value() * c, {a}, [pa = a.node(), c](Node& self) { push(pa, self.grad * c); });
}

Var add_scalar(const Var& a, double c) {
  return make(a.value().array() + c, {a}, [pa = a.node()](Node& self) { push(pa, self.grad); });
}

Var scale_by(const Var& a, const Var& s) {
  if (s.rows() != 1 || s.cols() != 1) throw std::invalid_argument("scale_by: factor must be 1x1");
  return make(a.value() * s.scalar(), {a, s}, [pa = a.node(), ps = s.node()](Node& self) {
    if (pa->requires_grad) pa->accumulate(self.grad * ps->value(0, 0));
    if (ps->requires_grad) ps->accumulate(Matrix::Constant(1, 1, self.grad.cwiseProduct(pa->value).sum()));
  });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: row shape mismatch");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make(std::move(out), {a, row}, [pa = a.node(), pr = row.node()](Node& self) {
    push(pa, self.grad);
    if (pr->requires_grad) pr->accumulate(self.grad.colwise().sum());
  });
}

Var broadcast_rows(const Var& row, Eigen::Index n) {
  if (row.rows() != 1) throw std::invalid_argument("broadcast_rows: expected a single row");
  Matrix out = row.value().replicate(n, 1);
  return make(std::move(out), {row}, [pr = row.node()](Node& self) { push(pr, self.grad.colwise().sum()); });
}

Var leaky_relu(const Var& a, double slope) {
  Matrix out = a.value().unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  return make(std::move(out), {a}, [pa = a.node(), slope](Node& self) {
    Matrix d = pa->value.unaryExpr([slope](double x) { return x > 0.0 ? 1.0 : slope; });
    push(pa, self.grad.cwiseProduct(d));
  });
}

Var relu(const Var& a) { return leaky_relu(a, 0.0); }

Var sigmoid(const Var& a) {
  Matrix out = a.value().unaryExpr([](double x) { return sigmoid_scalar(x); });
  return make(std::move(out), {a}, [pa = a.node()](Node& self) {
    Matrix d = self.value.array() * (1.0 - self.value.array());
    push(pa, self.grad.cwiseProduct(d));
  });
}

Var tanh(const Var& a) {
  Matrix out = a.value().array().tanh();
  return make(std::move(out), {a}, [pa = a.node()](Node& self) {
    Matrix d = 1.0 - self.value.array().square();
    push(pa, self.grad.cwiseProduct(d));
  });
}

Var exp(const Var& a) {
  Matrix out = a.value().array().exp();
  return make(std::move(out), {a}, [pa = a.node()](Node& self) { push(pa, self.grad.cwiseProduct(self.value)); });
}

Var log(const Var& a) {
  Matrix out = a.value().array().log();
  return make(std::move(out), {a}, [pa = a.node()](Node& self) {
    push(pa, self.grad.cwiseQuotient(pa->value));
  });
}

Var sin(const Var& a) {
  Matrix out = a.value().array().sin();
  return make(std::move(out), {a}, [pa = a.node()](Node& self) {
    Matrix d = pa->value.array().cos();
    push(pa, self.grad.cwiseProduct(d));
  });
}

Var square(const Var& a) {
  Matrix out = a.value().array().square();
  return make(std::move(out), {a}, [pa = a.node()](Node& self) { push(pa, 2.0 * self.grad.cwiseProduct(pa->value)); });
}

Var pow_int(const Var& a, int k) {
  if (k < 1) throw std::invalid_argument("pow_int: exponent must be >= 1");
  Matrix out = a.value().unaryExpr([k](double x) { return std::pow(x, k); });
  return make(std::move(out), {a}, [pa = a.node(), k](Node& self) {
    Matrix d = pa->value.unaryExpr([k](double x) { return k * std::pow(x, k - 1); });
    push(pa, self.grad.cwiseProduct(d));
  });
}

Var clamp(const Var& a, double lo, double hi) {
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return make(std::move(out), {a}, [pa = a.node(), lo, hi](Node& self) {
    Matrix d = pa->value.unaryExpr([lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; });
    push(pa, self.grad.cwiseProduct(d));
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row count mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<NodePtr> nodes;
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    nodes.push_back(p.node());
    offsets.push_back(off);
    off += p.cols();
  }
  return make(std::move(out), parts, [nodes, offsets](Node& self) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i]->requires_grad) nodes[i]->accumulate(self.grad.middleCols(offsets[i], nodes[i]->value.cols()));
    }
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::invalid_argument("slice_cols: out of range");
  Matrix out = a.value().middleCols(start, count);
  return make(std::move(out), {a}, [pa = a.node(), start, count](Node& self) {
    if (!pa->requires_grad) return;
    Matrix g = Matrix::Zero(pa->value.rows(), pa->value.cols());
    g.middleCols(start, count) = self.grad;
    pa->accumulate(g);
  });
}

namespace {
Matrix reshape_rowmajor(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor rm = m;
  return Eigen::Map<const RowMajor>(rm.data(), rows, cols);
}
}  // namespace

Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) throw std::invalid_argument("reshape: element count mismatch");
  return make(reshape_rowmajor(a.value(), rows, cols), {a}, [pa = a.node()](Node& self) {
    push(pa, reshape_rowmajor(self.grad, pa->value.rows(), pa->value.cols()));
  });
}

Var sum(const Var& a) {
  return make(Matrix::Constant(1, 1, a.value().sum()), {a}, [pa = a.node()](Node& self) {
    push(pa, Matrix::Constant(pa->value.rows(), pa->value.cols(), self.grad(0, 0)));
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw std::invalid_argument("mean: empty input");
  return scale(sum(a), 1.0 / n);
}

Var row_sum(const Var& a) {
  Matrix out = a.value().rowwise().sum();
  return make(std::move(out), {a}, [pa = a.node()](Node& self) {
    push(pa, self.grad.col(0).replicate(1, pa->value.cols()));
  });
}

Var logsumexp_rows(const Var& a) {
  const Matrix& v = a.value();
  Vector mx = v.rowwise().maxCoeff();
  Matrix shifted = v.colwise() - mx;
  Vector lse = mx.array() + shifted.array().exp().rowwise().sum().log();
  Matrix soft = (v.colwise() - lse).array().exp();
  return make(Matrix(lse), {a}, [pa = a.node(), soft](Node& self) {
    push(pa, soft.array().colwise() * self.grad.col(0).array());
  });
}

Var log_softmax_rows(const Var& a) {
  const Matrix& v = a.value();
  Vector mx = v.rowwise().maxCoeff();
  Matrix shifted = v.colwise() - mx;
  Vector lse = mx.array() + shifted.array().exp().rowwise().sum().log();
  Matrix out = v.colwise() - lse;
  Matrix soft = out.array().exp();
  return make(std::move(out), {a}, [pa = a.node(), soft](Node& self) {
    Vector gs = self.grad.rowwise().sum();
    push(pa, self.grad - Matrix(soft.array().colwise() * gs.array()));
  });
}

Var masked_softmax_rows(const Var& a, const BoolMatrix& mask) {
  if (mask.rows() != a.rows() || mask.cols() != a.cols()) throw std::invalid_argument("masked_softmax_rows: mask shape");
  const Matrix& v = a.value();
  Matrix p = Matrix::Zero(v.rows(), v.cols());
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < v.cols(); ++j)
      if (mask(i, j)) mx = std::max(mx, v(i, j));
    if (!std::isfinite(mx)) continue;
    double z = 0.0;
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      if (mask(i, j)) {
        p(i, j) = std::exp(v(i, j) - mx);
        z += p(i, j);
      }
    }
    p.row(i) /= z;
  }
  return make(p, {a}, [pa = a.node()](Node& self) {
    const Matrix& p = self.value;
    Vector dot = self.grad.cwiseProduct(p).rowwise().sum();
    Matrix g = p.cwiseProduct(Matrix(self.grad.colwise() - dot));
    push(pa, g);
  });
}

Var pairwise_diff(const Var& s) {
  const Eigen::Index n = s.rows();
  const Matrix& v = s.value();
  Matrix out(n * n, v.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out.row(i * n + j) = v.row(i) - v.row(j);
  return make(std::move(out), {s}, [ps = s.node(), n](Node& self) {
    Matrix g = Matrix::Zero(n, ps->value.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        g.row(i) += self.grad.row(i * n + j);
        g.row(j) -= self.grad.row(i * n + j);
      }
    }
    push(ps, g);
  });
}

Var group_sum_rows(const Var& a, Eigen::Index group) {
  if (group <= 0 || a.rows() % group != 0) throw std::invalid_argument("group_sum_rows: rows not divisible by group");
  const Eigen::Index n = a.rows() / group;
  Matrix out(n, a.cols());
  for (Eigen::Index i = 0; i < n; ++i) out.row(i) = a.value().middleRows(i * group, group).colwise().sum();
  return make(std::move(out), {a}, [pa = a.node(), group, n](Node& self) {
    Matrix g(pa->value.rows(), pa->value.cols());
    for (Eigen::Index i = 0; i < n; ++i) g.middleRows(i * group, group) = self.grad.row(i).replicate(group, 1);
    push(pa, g);
  });
}

Var outer_add(const Var& u, const Var& v) {
  if (u.cols() != 1 || v.cols() != 1) throw std::invalid_argument("outer_add: expects column vectors");
  Matrix out = u.value().replicate(1, v.rows()) + v.value().transpose().replicate(u.rows(), 1);
  return make(std::move(out), {u, v}, [pu = u.node(), pv = v.node()](Node& self) {
    if (pu->requires_grad) pu->accumulate(self.grad.rowwise().sum());
    if (pv->requires_grad) pv->accumulate(self.grad.colwise().sum().transpose());
  });
}

Var bernoulli_loglik(const Var& logits, const Matrix& target, const Matrix& weight) {
  const Eigen::Index n = target.rows();
  if (target.cols() != n || logits.rows() != n * n) throw std::invalid_argument("bernoulli_loglik: shape mismatch");
  const bool weighted = weight.size() != 0;
  if (weighted && (weight.rows() != n || weight.cols() != n)) throw std::invalid_argument("bernoulli_loglik: weight shape");
  const Eigen::Index k = logits.cols();
  const Matrix& l = logits.value();
  Matrix out = Matrix::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double w = weighted ? weight(i, j) : 1.0;
      if (w == 0.0) continue;
      const double a = target(i, j);
      for (Eigen::Index c = 0; c < k; ++c) {
        const double x = l(i * n + j, c);
        out(i, c) += w * (a * log_sigmoid(x) + (1.0 - a) * log_sigmoid(-x));
      }
    }
  }
  return make(std::move(out), {logits}, [pl = logits.node(), target, weight, n, k, weighted](Node& self) {
    Matrix g = Matrix::Zero(n * n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const double w = weighted ? weight(i, j) : 1.0;
        if (w == 0.0) continue;
        for (Eigen::Index c = 0; c < k; ++c) {
          const double x = pl->value(i * n + j, c);
          g(i * n + j, c) = self.grad(i, c) * w * (target(i, j) - sigmoid_scalar(x));
        }
      }
    }
    push(pl, g);
  });
}

Var row_cosine(const Matrix& x, const Var& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) throw std::invalid_argument("row_cosine: shape mismatch");
  const Eigen::Index n = x.rows();
  Vector nx = x.rowwise().norm();
  Vector ny = y.value().rowwise().norm();
  Matrix out = Matrix::Zero(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (nx(i) > 0.0 && ny(i) > 0.0) out(i, 0) = x.row(i).dot(y.value().row(i)) / (nx(i) * ny(i));
  }
  return make(out, {y}, [x, nx, ny, py = y.node()](Node& self) {
    Matrix g = Matrix::Zero(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (nx(i) == 0.0 || ny(i) == 0.0) continue;
      const double c = self.value(i, 0);
      g.row(i) = self.grad(i, 0) * (x.row(i) / (nx(i) * ny(i)) - c * py->value.row(i) / (ny(i) * ny(i)));
    }
    push(py, g);
  });
}

}  // namespace dyngen::ag
