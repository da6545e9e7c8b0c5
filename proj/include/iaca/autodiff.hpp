#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "iaca/errors.hpp"
#include "iaca/matrix.hpp"

namespace iaca {

enum class OpTag : std::uint8_t {
  Leaf,
  MatMul,
  Add,
  Sub,
  Hadamard,
  Scale,
  Transpose,
  ConcatRows,
  ConcatCols,
  Softmax,
  Tanh,
  Relu,
  AddColumn,     // X (d x L) + b (d x 1) broadcast over columns
  MulRow,        // X (d x L) * r (1 x L) broadcast over rows
  Column,        // k-th column of X
  Sum,
  CccLoss,
};

class Graph;

/// Per-node operation attributes (temperature, scale factor, column index, ...).
struct NodeAttr {
  double scalar = 0.0;
  std::size_t index = 0;
  Axis axis = Axis::Columns;
  Matrix aux;
};

/// Handle to a node owned by a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Append-only tape of immutable nodes. Parents always precede children, so the
/// node order is a topological order and backward is a single reverse sweep.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var leaf(Matrix value) { return push(OpTag::Leaf, std::move(value), {}); }

  const Matrix& value(Var v) const { return nodes_.at(check(v)).value; }
  OpTag op(Var v) const { return nodes_.at(check(v)).op; }
  Var input(Var v, std::size_t k) const { return Var{const_cast<Graph*>(this), nodes_.at(check(v)).parents.at(k)}; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool differentiated() const noexcept { return differentiated_; }

  /// Reverse-mode sweep from a 1x1 seed. Allowed once per graph.
  void backward(Var seed);

  /// Gradient of the backward seed w.r.t. v; zeros when v was unreachable.
  Matrix grad(Var v) const {
    if (!differentiated_) throw StateError("grad requested before backward()");
    const auto id = check(v);
    if (grads_[id].size() == 0) {
      return Matrix(nodes_[id].value.rows(), nodes_[id].value.cols());
    }
    return grads_[id];
  }

  // Node construction, used by the free functions below.
  using Attr = NodeAttr;
  Var push(OpTag op, Matrix value, std::vector<std::size_t> parents, Attr attr = NodeAttr{}) {
    if (differentiated_) throw StateError("cannot extend a graph after backward()");
    nodes_.push_back(Node{std::move(value), op, std::move(parents), std::move(attr)});
    return Var{this, nodes_.size() - 1};
  }
  std::size_t check(Var v) const {
    if (v.graph != this || v.id >= nodes_.size()) {
      throw ContractError("variable does not belong to this graph");
    }
    return v.id;
  }

 private:
  struct Node {
    Matrix value;
    OpTag op;
    std::vector<std::size_t> parents;
    Attr attr;
  };

  void accumulate(std::size_t id, const Matrix& g) {
    auto& slot = grads_[id];
    if (slot.size() == 0) {
      slot = g;
    } else {
      for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += g[i];
    }
  }

  std::vector<Node> nodes_;
  std::vector<Matrix> grads_;
  bool differentiated_ = false;
};

inline const Matrix& Var::value() const {
  if (graph == nullptr) throw ContractError("null variable");
  return graph->value(*this);
}

namespace detail {

inline Graph& same_graph(Var a, Var b, const char* op) {
  if (a.graph == nullptr || a.graph != b.graph) {
    throw ContractError(std::string(op) + ": operands belong to different graphs");
  }
  return *a.graph;
}

}  // namespace detail

// Differentiable operations.

inline Var matmul(Var a, Var b) {
  auto& g = detail::same_graph(a, b, "matmul");
  return g.push(OpTag::MatMul, matmul(a.value(), b.value()), {a.id, b.id});
}

inline Var add(Var a, Var b) {
  auto& g = detail::same_graph(a, b, "add");
  return g.push(OpTag::Add, add(a.value(), b.value()), {a.id, b.id});
}

inline Var sub(Var a, Var b) {
  auto& g = detail::same_graph(a, b, "sub");
  return g.push(OpTag::Sub, sub(a.value(), b.value()), {a.id, b.id});
}

inline Var hadamard(Var a, Var b) {
  auto& g = detail::same_graph(a, b, "hadamard");
  return g.push(OpTag::Hadamard, hadamard(a.value(), b.value()), {a.id, b.id});
}

inline Var scale(Var a, double c) {
  Graph::Attr attr;
  attr.scalar = c;
  return a.graph->push(OpTag::Scale, scale(a.value(), c), {a.id}, std::move(attr));
}

inline Var transpose(Var a) { return a.graph->push(OpTag::Transpose, transpose(a.value()), {a.id}); }

inline Var concat_rows(Var a, Var b) {
  auto& g = detail::same_graph(a, b, "concat_rows");
  return g.push(OpTag::ConcatRows, concat_rows(a.value(), b.value()), {a.id, b.id});
}

inline Var concat_cols(Var a, Var b) {
  auto& g = detail::same_graph(a, b, "concat_cols");
  return g.push(OpTag::ConcatCols, concat_cols(a.value(), b.value()), {a.id, b.id});
}

inline Var softmax(Var a, Axis axis, double temperature = 1.0) {
  Graph::Attr attr;
  attr.scalar = temperature;
  attr.axis = axis;
  return a.graph->push(OpTag::Softmax, softmax(a.value(), axis, temperature), {a.id}, std::move(attr));
}

inline Var tanh(Var a) { return a.graph->push(OpTag::Tanh, tanh(a.value()), {a.id}); }

inline Var relu(Var a) { return a.graph->push(OpTag::Relu, relu(a.value()), {a.id}); }

/// x (d x L) plus a column vector b (d x 1) added to every column.
inline Var add_column(Var x, Var b) {
  auto& g = detail::same_graph(x, b, "add_column");
  const auto& xv = x.value();
  const auto& bv = b.value();
  if (bv.cols() != 1 || bv.rows() != xv.rows()) {
    throw ShapeError("add_column: expected bias " + Matrix::shape_string(xv.rows(), 1) + " for " +
                     xv.shape() + ", got " + bv.shape());
  }
  Matrix out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += bv(i, 0);
  return g.push(OpTag::AddColumn, std::move(out), {x.id, b.id});
}

/// x (d x L) scaled column-wise by a row vector r (1 x L): out(i, j) = x(i, j) * r(0, j).
/// Equivalent to the Hadamard product with r replicated to d rows.
inline Var mul_row(Var x, Var r) {
  auto& g = detail::same_graph(x, r, "mul_row");
  const auto& xv = x.value();
  const auto& rv = r.value();
  if (rv.rows() != 1 || rv.cols() != xv.cols()) {
    throw ShapeError("mul_row: expected row " + Matrix::shape_string(1, xv.cols()) + " for " +
                     xv.shape() + ", got " + rv.shape());
  }
  Matrix out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) *= rv(0, j);
  return g.push(OpTag::MulRow, std::move(out), {x.id, r.id});
}

inline Var column(Var x, std::size_t k) {
  const auto& xv = x.value();
  if (k >= xv.cols()) {
    throw ShapeError("column: index " + std::to_string(k) + " out of range for " + xv.shape());
  }
  Matrix out(xv.rows(), 1);
  for (std::size_t i = 0; i < xv.rows(); ++i) out(i, 0) = xv(i, k);
  Graph::Attr attr;
  attr.index = k;
  return x.graph->push(OpTag::Column, std::move(out), {x.id}, std::move(attr));
}

inline Var sum(Var x) { return x.graph->push(OpTag::Sum, Matrix(1, 1, sum(x.value())), {x.id}); }

// Backward sweep.

inline void Graph::backward(Var seed) {
  const auto sid = check(seed);
  if (differentiated_) throw StateError("backward() already ran on this graph");
  const auto& sv = nodes_[sid].value;
  if (sv.rows() != 1 || sv.cols() != 1) {
    throw ContractError("backward seed must be 1x1, got " + sv.shape());
  }
  differentiated_ = true;
  grads_.assign(nodes_.size(), Matrix());
  grads_[sid] = Matrix(1, 1, 1.0);

  for (std::size_t id = sid + 1; id-- > 0;) {
    if (grads_[id].size() == 0) continue;
    const Node& n = nodes_[id];
    const Matrix& gy = grads_[id];
    const auto& p = n.parents;
    switch (n.op) {
      case OpTag::Leaf:
        break;
      case OpTag::MatMul: {
        const auto& a = nodes_[p[0]].value;
        const auto& b = nodes_[p[1]].value;
        accumulate(p[0], matmul_nt(gy, b));
        accumulate(p[1], matmul_tn(a, gy));
        break;
      }
      case OpTag::Add:
        accumulate(p[0], gy);
        accumulate(p[1], gy);
        break;
      case OpTag::Sub:
        accumulate(p[0], gy);
        accumulate(p[1], iaca::scale(gy, -1.0));
        break;
      case OpTag::Hadamard:
        accumulate(p[0], hadamard(gy, nodes_[p[1]].value));
        accumulate(p[1], hadamard(gy, nodes_[p[0]].value));
        break;
      case OpTag::Scale:
        accumulate(p[0], iaca::scale(gy, n.attr.scalar));
        break;
      case OpTag::Transpose:
        accumulate(p[0], iaca::transpose(gy));
        break;
      case OpTag::ConcatRows: {
        const auto& a = nodes_[p[0]].value;
        const auto& b = nodes_[p[1]].value;
        Matrix ga(a.rows(), a.cols()), gb(b.rows(), b.cols());
        std::copy(gy.data().begin(), gy.data().begin() + static_cast<std::ptrdiff_t>(a.size()),
                  ga.data().begin());
        std::copy(gy.data().begin() + static_cast<std::ptrdiff_t>(a.size()), gy.data().end(),
                  gb.data().begin());
        accumulate(p[0], ga);
        accumulate(p[1], gb);
        break;
      }
      case OpTag::ConcatCols: {
        const auto& a = nodes_[p[0]].value;
        accumulate(p[0], slice_cols(gy, 0, a.cols()));
        accumulate(p[1], slice_cols(gy, a.cols(), gy.cols() - a.cols()));
        break;
      }
      case OpTag::Softmax: {
        // dx = (1/T) * y * (dy - <dy, y>_slice)
        const auto& y = n.value;
        const bool by_col = n.attr.axis == Axis::Columns;
        const double inv_t = 1.0 / n.attr.scalar;
        Matrix gx(y.rows(), y.cols());
        const std::size_t slices = by_col ? y.cols() : y.rows();
        const std::size_t len = by_col ? y.rows() : y.cols();
        for (std::size_t s = 0; s < slices; ++s) {
          double dot = 0.0;
          for (std::size_t i = 0; i < len; ++i) {
            const auto r = by_col ? i : s;
            const auto c = by_col ? s : i;
            dot += gy(r, c) * y(r, c);
          }
          for (std::size_t i = 0; i < len; ++i) {
            const auto r = by_col ? i : s;
            const auto c = by_col ? s : i;
            gx(r, c) = inv_t * y(r, c) * (gy(r, c) - dot);
          }
        }
        accumulate(p[0], gx);
        break;
      }
      case OpTag::Tanh: {
        Matrix gx = gy;
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= 1.0 - n.value[i] * n.value[i];
        accumulate(p[0], gx);
        break;
      }
      case OpTag::Relu: {
        const auto& x = nodes_[p[0]].value;
        Matrix gx = gy;
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = x[i] > 0.0 ? gx[i] : 0.0;
        accumulate(p[0], gx);
        break;
      }
      case OpTag::AddColumn: {
        Matrix gb(gy.rows(), 1);
        for (std::size_t i = 0; i < gy.rows(); ++i)
          for (std::size_t j = 0; j < gy.cols(); ++j) gb(i, 0) += gy(i, j);
        accumulate(p[0], gy);
        accumulate(p[1], gb);
        break;
      }
      case OpTag::MulRow: {
        const auto& x = nodes_[p[0]].value;
        const auto& r = nodes_[p[1]].value;
        Matrix gx = gy;
        Matrix gr(1, r.cols());
        for (std::size_t i = 0; i < gy.rows(); ++i) {
          for (std::size_t j = 0; j < gy.cols(); ++j) {
            gx(i, j) *= r(0, j);
            gr(0, j) += gy(i, j) * x(i, j);
          }
        }
        accumulate(p[0], gx);
        accumulate(p[1], gr);
        break;
      }
      case OpTag::Column: {
        const auto& x = nodes_[p[0]].value;
        Matrix gx(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i) gx(i, n.attr.index) = gy(i, 0);
        accumulate(p[0], gx);
        break;
      }
      case OpTag::Sum: {
        const auto& x = nodes_[p[0]].value;
        accumulate(p[0], Matrix(x.rows(), x.cols(), gy(0, 0)));
        break;
      }
      case OpTag::CccLoss: {
        // attr.aux holds d(loss)/d(pred), computed at construction.
        accumulate(p[0], iaca::scale(n.attr.aux, gy(0, 0)));
        break;
      }
    }
  }
}

/// Central-difference gradient estimate of a scalar function, entry by entry.
inline Matrix finite_diff(const std::function<double(const Matrix&)>& f, const Matrix& x,
                          double eps = 1e-5) {
  Matrix g(x.rows(), x.cols());
  Matrix probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = f(probe);
    probe[i] = orig - eps;
    const double down = f(probe);
    probe[i] = orig;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||, floor): the comparison used by every gradient check.
inline double relative_error(const Matrix& a, const Matrix& b, double floor = 1e-8) {
  const double denom = std::max({frobenius(a), frobenius(b), floor});
  return frobenius(sub(a, b)) / denom;
}

}  // namespace iaca
