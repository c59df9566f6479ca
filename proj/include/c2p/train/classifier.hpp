#pragma once

#include <map>
#include <string>

#include "c2p/encoder/parameters.hpp"
#include "c2p/encoder/tape.hpp"
#include "c2p/error.hpp"

namespace c2p::train {

/// Single-logit linear head: logit(v) = v . w + b. Initialized to zero, so an
/// untrained head scores every image at probability 0.5.
class LinearClassifier {
 public:
  LinearClassifier() = default;
  explicit LinearClassifier(int dim) {
    store_.add("fc.weight", nn::Matrix::Zero(1, dim), true);
    store_.add("fc.bias", nn::Matrix::Zero(1, 1), true);
  }

  static LinearClassifier from_tensors(const std::map<std::string, nn::Matrix>& tensors) {
    auto it = tensors.find("fc.weight");
    require(it != tensors.end(), ErrorKind::InvalidInput, "classifier archive lacks fc.weight");
    LinearClassifier c(static_cast<int>(it->second.cols()));
    nn::assign_from(c.store_, tensors);
    return c;
  }

  int dim() const { return static_cast<int>(weight().cols()); }
  const nn::Matrix& weight() const { return store_.at("fc.weight").value; }
  double bias() const { return store_.at("fc.bias").value(0, 0); }
  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }

  double logit(const nn::RowVector& v) const {
    require(v.size() == weight().cols(), ErrorKind::InvalidInput, "feature dimension differs from classifier");
    return v.dot(weight().row(0)) + bias();
  }

  /// N x 1 logits on the tape.
  nn::Var forward(nn::Var features) const {
    nn::Tape& t = *features.tape;
    return nn::add_row(nn::matmul_nt(features, t.param(store_.at("fc.weight"))), t.param(store_.at("fc.bias")));
  }

 private:
  nn::ParameterStore store_;
};

}  // namespace c2p::train
