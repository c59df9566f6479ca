#pragma once

#include <string>

#include "c2p/encoder/tape.hpp"
#include "c2p/error.hpp"
#include "c2p/train/classifier.hpp"

namespace c2p::analysis {

/// f_d = v_d * w_d + b, with the scalar bias broadcast to every component.
/// Summing f and removing the (D - 1) extra bias copies recovers the logit.
struct DetectionFeature {
  std::string image_id;
  nn::RowVector vector;
  int label = 0;
};

inline nn::RowVector detection_vector(const nn::RowVector& v, const nn::RowVector& w, double b) {
  require(v.size() == w.size(), ErrorKind::InvalidInput,
          "feature has " + std::to_string(v.size()) + " dims, classifier " + std::to_string(w.size()));
  return (v.array() * w.array() + b).matrix();
}

inline DetectionFeature detection_feature(const nn::RowVector& v, const train::LinearClassifier& classifier,
                                          std::string image_id = {}, int label = 0) {
  return {std::move(image_id), detection_vector(v, classifier.weight().row(0), classifier.bias()), label};
}

/// sum(f) - (D - 1) b, which equals the classifier logit.
inline double logit_from_detection(const nn::RowVector& f, double b) {
  return f.sum() - static_cast<double>(f.size() - 1) * b;
}

}  // namespace c2p::analysis
