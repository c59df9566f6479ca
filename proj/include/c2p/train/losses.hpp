#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "c2p/encoder/embedding.hpp"
#include "c2p/encoder/tape.hpp"
#include "c2p/error.hpp"

namespace c2p::train {

using nn::Matrix;
using nn::Var;

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace detail {

struct ContrastiveParts {
  double loss = 0.0;
  Matrix dlogits;  // d loss / d S where S = v u^T / tau
};

/// Symmetric in-batch InfoNCE on the similarity matrix S (rows: images,
/// columns: texts). Uses max-shifted log-sum-exp in both directions.
inline ContrastiveParts contrastive_from_similarity(const Matrix& s, bool want_grad) {
  const Eigen::Index n = s.rows();
  ContrastiveParts out;
  Matrix row_soft(n, n), col_soft(n, n);
  double l_vu = 0.0, l_uv = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = s.row(i).maxCoeff();
    row_soft.row(i) = (s.row(i).array() - m).exp();
    const double z = row_soft.row(i).sum();
    row_soft.row(i) /= z;
    l_vu += m + std::log(z) - s(i, i);
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    const double m = s.col(j).maxCoeff();
    col_soft.col(j) = (s.col(j).array() - m).exp();
    const double z = col_soft.col(j).sum();
    col_soft.col(j) /= z;
    l_uv += m + std::log(z) - s(j, j);
  }
  out.loss = 0.5 * (l_vu + l_uv) / static_cast<double>(n);
  if (want_grad) {
    const Matrix eye = Matrix::Identity(n, n);
    out.dlogits = ((row_soft - eye) + (col_soft - eye)) / (2.0 * static_cast<double>(n));
  }
  return out;
}

inline void check_pair(const Matrix& u, const Matrix& v, double temperature) {
  require(u.rows() == v.rows() && u.cols() == v.cols(), ErrorKind::InvalidInput,
          "contrastive loss: u and v must have the same shape");
  require(u.rows() >= 1, ErrorKind::InvalidInput, "contrastive loss: empty batch");
  require(temperature > 0.0, ErrorKind::InvalidInput, "contrastive loss: temperature must be positive");
}

}  // namespace detail

/// (L_{v->u} + L_{u->v}) / 2 over raw inner products v_i . u_j / temperature.
/// Callers normalize first when cosine similarity is wanted.
inline double contrastive_loss(const Matrix& u, const Matrix& v, double temperature = 1.0) {
  detail::check_pair(u, v, temperature);
  return detail::contrastive_from_similarity(v * u.transpose() / temperature, false).loss;
}

inline double contrastive_loss(const nn::EmbeddingBatch& u, const nn::EmbeddingBatch& v, double temperature = 1.0) {
  return contrastive_loss(u.vectors, v.vectors, temperature);
}

/// Tape version; gradients flow to whichever of u, v require them.
inline Var contrastive_loss(Var u, Var v, double temperature = 1.0) {
  nn::Tape& t = *u.tape;
  detail::check_pair(u.value(), v.value(), temperature);
  auto parts = detail::contrastive_from_similarity(v.value() * u.value().transpose() / temperature,
                                                   t.any_needs_grad({u, v}));
  Matrix value = Matrix::Constant(1, 1, parts.loss);
  return t.push(std::move(value), t.any_needs_grad({u, v}),
                [u, v, temperature, ds = std::move(parts.dlogits)](nn::Tape& t, const Matrix& g) {
                  const double scale = g(0, 0) / temperature;
                  if (t.needs_grad(v)) t.accumulate(v, scale * (ds * t.value(u)));
                  if (t.needs_grad(u)) t.accumulate(u, scale * (ds.transpose() * t.value(v)));
                });
}

/// Mean binary cross-entropy on single logits, softplus form:
/// softplus(z) - y z.
inline double classification_loss(std::span<const double> logits, std::span<const int> labels) {
  require(logits.size() == labels.size(), ErrorKind::InvalidInput, "logits and labels differ in length");
  require(!logits.empty(), ErrorKind::InvalidInput, "classification loss: empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    require(labels[i] == 0 || labels[i] == 1, ErrorKind::InvalidInput, "labels must be 0 or 1");
    sum += softplus(logits[i]) - labels[i] * logits[i];
  }
  return sum / static_cast<double>(logits.size());
}

/// Tape version over an N x 1 logit column.
inline Var classification_loss(Var logits, const std::vector<int>& labels) {
  nn::Tape& t = *logits.tape;
  require(logits.cols() == 1 && static_cast<std::size_t>(logits.rows()) == labels.size(), ErrorKind::InvalidInput,
          "logits must be N x 1 with N labels");
  const Matrix& z = logits.value();
  const double loss = classification_loss(std::span<const double>(z.data(), static_cast<std::size_t>(z.size())),
                                          labels);
  return t.push(Matrix::Constant(1, 1, loss), t.needs_grad(logits), [logits, labels](nn::Tape& t, const Matrix& g) {
    const Matrix& z = t.value(logits);
    Matrix dz(z.rows(), 1);
    const double n = static_cast<double>(z.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i) dz(i, 0) = g(0, 0) * (sigmoid(z(i, 0)) - labels[i]) / n;
    t.accumulate(logits, dz);
  });
}

/// contrastive + alpha * classification
inline double combine_losses(double contrastive, double classification, double alpha) {
  require(alpha >= 0.0, ErrorKind::InvalidInput, "alpha must be non-negative");
  return contrastive + alpha * classification;
}

inline double total_loss(const Matrix& u, const Matrix& v, std::span<const double> logits,
                         std::span<const int> labels, double alpha, double temperature = 1.0) {
  return combine_losses(contrastive_loss(u, v, temperature), classification_loss(logits, labels), alpha);
}

}  // namespace c2p::train
