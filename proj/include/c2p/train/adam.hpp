#pragma once

#include <cmath>
#include <map>
#include <string>

#include "json.hpp"

#include "c2p/encoder/parameters.hpp"

namespace c2p::train {

/// torch.optim.Adam defaults.
struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AdamConfig, beta1, beta2, eps, weight_decay)

class Adam {
 public:
  Adam(double learning_rate, AdamConfig config = {}) : lr_(learning_rate), cfg_(config) {}

  /// Updates every trainable parameter of `store` from its `grad`.
  void step(nn::ParameterStore& store, const std::string& scope) {
    for (auto& [name, p] : store) {
      if (!p.trainable) continue;
      auto& st = state_[scope + "/" + name];
      if (st.m.size() == 0) {
        st.m = nn::Matrix::Zero(p.value.rows(), p.value.cols());
        st.v = nn::Matrix::Zero(p.value.rows(), p.value.cols());
      }
      nn::Matrix g = p.grad.size() == 0 ? nn::Matrix::Zero(p.value.rows(), p.value.cols()) : p.grad;
      if (cfg_.weight_decay != 0.0) g += cfg_.weight_decay * p.value;
      ++st.t;
      st.m = cfg_.beta1 * st.m + (1.0 - cfg_.beta1) * g;
      st.v = cfg_.beta2 * st.v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
      const double bc1 = 1.0 - std::pow(cfg_.beta1, st.t);
      const double bc2 = 1.0 - std::pow(cfg_.beta2, st.t);
      const double step = lr_ / bc1;
      p.value.array() -= step * st.m.array() / ((st.v.array() / bc2).sqrt() + cfg_.eps);
    }
  }

 private:
  struct State {
    nn::Matrix m, v;
    int t = 0;
  };
  double lr_;
  AdamConfig cfg_;
  std::map<std::string, State> state_;
};

}  // namespace c2p::train
