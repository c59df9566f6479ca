#pragma once

#include <cmath>

#include "c2p/encoder/tape.hpp"
#include "c2p/error.hpp"

namespace c2p::nn {

/// N x D feature rows. When `normalized` is set every row has unit L2 norm.
struct EmbeddingBatch {
  Matrix vectors;
  bool normalized = false;

  Eigen::Index size() const { return vectors.rows(); }
  Eigen::Index dim() const { return vectors.cols(); }

  bool valid(double tol = 1e-5) const {
    if (!vectors.allFinite()) return false;
    if (!normalized) return true;
    for (Eigen::Index i = 0; i < vectors.rows(); ++i)
      if (std::abs(vectors.row(i).norm() - 1.0) > tol) return false;
    return true;
  }
};

inline EmbeddingBatch normalize(const EmbeddingBatch& batch) {
  if (batch.normalized) return batch;
  EmbeddingBatch out{batch.vectors, true};
  for (Eigen::Index i = 0; i < out.vectors.rows(); ++i) {
    const double n = out.vectors.row(i).norm();
    require(n > 0.0 && std::isfinite(n), ErrorKind::NumericalError, "cannot normalize a zero or non-finite row");
    out.vectors.row(i) /= n;
  }
  return out;
}

}  // namespace c2p::nn
