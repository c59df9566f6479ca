#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "c2p/error.hpp"

namespace c2p::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// A named tensor owned by a model. Only trainable parameters receive
/// gradients from a tape.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = false;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

/// Records a forward computation so gradients can be pulled back from a scalar
/// output. Nodes that no trainable parameter feeds into are never visited on
/// the way back. Parameters are referenced, not copied, and must outlive the
/// tape.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& grad_out)>;

  Var constant(Matrix value) { return push(std::move(value), false, nullptr); }

  /// One node per parameter per tape; gradients from every use accumulate there.
  Var param(const Parameter& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{this, it->second};
    Var v = push(Matrix(), p.trainable, nullptr);
    nodes_[v.id].external = &p.value;
    param_nodes_.emplace(&p, v.id);
    return v;
  }

  /// Appends a derived node. `backward` receives this node's upstream gradient
  /// and must route it to parents via accumulate().
  Var push(Matrix value, bool needs_grad, Backward backward) {
    nodes_.push_back(Node{std::move(value), Matrix(), needs_grad, std::move(backward), nullptr});
    return Var{this, nodes_.size() - 1};
  }

  const Matrix& value(Var v) const {
    const Node& n = nodes_[v.id];
    return n.external != nullptr ? *n.external : n.value;
  }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
  bool any_needs_grad(std::initializer_list<Var> vs) const {
    for (Var v : vs)
      if (needs_grad(v)) return true;
    return false;
  }

  void accumulate(Var v, const Matrix& g) {
    Node& n = nodes_[v.id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  /// Backpropagates from a 1x1 node.
  void backward(Var loss) {
    require(value(loss).size() == 1, ErrorKind::InvalidInput, "backward() needs a scalar output");
    if (!nodes_[loss.id].needs_grad) return;
    nodes_[loss.id].grad = Matrix::Ones(1, 1);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.needs_grad || n.grad.size() == 0 || !n.backward) continue;
      n.backward(*this, n.grad);
    }
  }

  /// Gradient that reached a parameter; zeros when it was unused or frozen.
  Matrix grad_of(const Parameter& p) const {
    auto it = param_nodes_.find(&p);
    if (it == param_nodes_.end() || nodes_[it->second].grad.size() == 0)
      return Matrix::Zero(p.value.rows(), p.value.cols());
    return nodes_[it->second].grad;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Backward backward;
    const Matrix* external = nullptr;
  };
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

inline const Matrix& Var::value() const { return tape->value(*this); }

// ---- ops ------------------------------------------------------------------

inline Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  const bool ng = t.any_needs_grad({a, b});
  return t.push(a.value() * b.value(), ng, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.needs_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

/// a * b^T
inline Var matmul_nt(Var a, Var b) {
  Tape& t = *a.tape;
  const bool ng = t.any_needs_grad({a, b});
  return t.push(a.value() * b.value().transpose(), ng, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accumulate(a, g * t.value(b));
    if (t.needs_grad(b)) t.accumulate(b, g.transpose() * t.value(a));
  });
}

inline Var add(Var a, Var b) {
  Tape& t = *a.tape;
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::InvalidInput, "add: shape mismatch");
  const bool ng = t.any_needs_grad({a, b});
  return t.push(a.value() + b.value(), ng, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

/// Adds a 1 x n row to every row of a.
inline Var add_row(Var a, Var row) {
  Tape& t = *a.tape;
  require(row.rows() == 1 && row.cols() == a.cols(), ErrorKind::InvalidInput, "add_row: shape mismatch");
  const bool ng = t.any_needs_grad({a, row});
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return t.push(std::move(out), ng, [a, row](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.needs_grad(row)) t.accumulate(row, g.colwise().sum());
  });
}

inline Var scale(Var a, double s) {
  Tape& t = *a.tape;
  return t.push(a.value() * s, t.needs_grad(a), [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); });
}

/// Elementwise product with a constant matrix.
inline Var mul_const(Var a, Matrix mask) {
  Tape& t = *a.tape;
  Matrix out = a.value().cwiseProduct(mask);
  return t.push(std::move(out), t.needs_grad(a),
                [a, mask = std::move(mask)](Tape& t, const Matrix& g) { t.accumulate(a, g.cwiseProduct(mask)); });
}

/// Row-wise layer normalization with affine 1 x n gamma/beta.
inline Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5) {
  Tape& t = *x.tape;
  const Matrix& X = x.value();
  const Eigen::Index n = X.cols();
  Matrix xhat(X.rows(), n);
  Eigen::VectorXd inv_sigma(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double mu = X.row(i).mean();
    const double var = (X.row(i).array() - mu).square().mean();
    inv_sigma(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (X.row(i).array() - mu) * inv_sigma(i);
  }
  Matrix out = xhat;
  out.array().rowwise() *= gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  const bool ng = t.any_needs_grad({x, gamma, beta});
  return t.push(std::move(out), ng,
                [x, gamma, beta, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](Tape& t, const Matrix& g) {
                  if (t.needs_grad(gamma)) t.accumulate(gamma, g.cwiseProduct(xhat).colwise().sum());
                  if (t.needs_grad(beta)) t.accumulate(beta, g.colwise().sum());
                  if (!t.needs_grad(x)) return;
                  Matrix dxhat = g;
                  dxhat.array().rowwise() *= t.value(gamma).row(0).array();
                  Matrix dx(g.rows(), g.cols());
                  for (Eigen::Index i = 0; i < g.rows(); ++i) {
                    const double m1 = dxhat.row(i).mean();
                    const double m2 = dxhat.row(i).cwiseProduct(xhat.row(i)).mean();
                    dx.row(i) = (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2) * inv_sigma(i);
                  }
                  t.accumulate(x, dx);
                });
}

/// x * sigmoid(1.702 x), the activation used by CLIP towers.
inline Var quick_gelu(Var x) {
  Tape& t = *x.tape;
  const Matrix& X = x.value();
  Matrix s = (1.0 / (1.0 + (-1.702 * X.array()).exp())).matrix();
  Matrix out = X.cwiseProduct(s);
  return t.push(std::move(out), t.needs_grad(x), [x, s = std::move(s)](Tape& t, const Matrix& g) {
    const auto& X = t.value(x).array();
    Matrix d = (s.array() + 1.702 * X * s.array() * (1.0 - s.array())).matrix();
    t.accumulate(x, g.cwiseProduct(d));
  });
}

inline Matrix softmax_rows_value(const Matrix& X) {
  Matrix out(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double m = X.row(i).maxCoeff();
    out.row(i) = (X.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

inline Var softmax_rows(Var x) {
  Tape& t = *x.tape;
  Matrix y = softmax_rows_value(x.value());
  Matrix y_copy = y;
  return t.push(std::move(y), t.needs_grad(x), [x, y = std::move(y_copy)](Tape& t, const Matrix& g) {
    Matrix gy = g.cwiseProduct(y);
    Eigen::VectorXd dots = gy.rowwise().sum();
    Matrix dx = gy - (y.array().colwise() * dots.array()).matrix();
    t.accumulate(x, dx);
  });
}

inline Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = *a.tape;
  Matrix out = a.value().middleCols(start, count);
  return t.push(std::move(out), t.needs_grad(a), [a, start, count](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(t.value(a).rows(), t.value(a).cols());
    full.middleCols(start, count) = g;
    t.accumulate(a, full);
  });
}

inline Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = *a.tape;
  Matrix out = a.value().middleRows(start, count);
  return t.push(std::move(out), t.needs_grad(a), [a, start, count](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(t.value(a).rows(), t.value(a).cols());
    full.middleRows(start, count) = g;
    t.accumulate(a, full);
  });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorKind::InvalidInput, "concat_cols: no inputs");
  Tape& t = *parts.front().tape;
  Eigen::Index cols = 0;
  bool ng = false;
  for (Var p : parts) {
    require(p.rows() == parts.front().rows(), ErrorKind::InvalidInput, "concat_cols: row mismatch");
    cols += p.cols();
    ng = ng || t.needs_grad(p);
  }
  Matrix out(parts.front().rows(), cols);
  Eigen::Index c = 0;
  for (Var p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return t.push(std::move(out), ng, [parts](Tape& t, const Matrix& g) {
    Eigen::Index c = 0;
    for (Var p : parts) {
      const Eigen::Index w = t.value(p).cols();
      if (t.needs_grad(p)) t.accumulate(p, g.middleCols(c, w));
      c += w;
    }
  });
}

inline Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorKind::InvalidInput, "concat_rows: no inputs");
  Tape& t = *parts.front().tape;
  Eigen::Index rows = 0;
  bool ng = false;
  for (Var p : parts) {
    require(p.cols() == parts.front().cols(), ErrorKind::InvalidInput, "concat_rows: column mismatch");
    rows += p.rows();
    ng = ng || t.needs_grad(p);
  }
  Matrix out(rows, parts.front().cols());
  Eigen::Index r = 0;
  for (Var p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return t.push(std::move(out), ng, [parts](Tape& t, const Matrix& g) {
    Eigen::Index r = 0;
    for (Var p : parts) {
      const Eigen::Index h = t.value(p).rows();
      if (t.needs_grad(p)) t.accumulate(p, g.middleRows(r, h));
      r += h;
    }
  });
}

/// Divides each row by its L2 norm.
inline Var l2_normalize_rows(Var x) {
  Tape& t = *x.tape;
  const Matrix& X = x.value();
  Eigen::VectorXd norms = X.rowwise().norm();
  require((norms.array() > 0.0).all(), ErrorKind::NumericalError, "cannot normalize a zero row");
  Matrix y = (X.array().colwise() / norms.array()).matrix();
  Matrix y_copy = y;
  return t.push(std::move(y), t.needs_grad(x),
                [x, y = std::move(y_copy), norms = std::move(norms)](Tape& t, const Matrix& g) {
                  Eigen::VectorXd dots = g.cwiseProduct(y).rowwise().sum();
                  Matrix dx = ((g - (y.array().colwise() * dots.array()).matrix()).array().colwise() / norms.array())
                                  .matrix();
                  t.accumulate(x, dx);
                });
}

}  // namespace c2p::nn
