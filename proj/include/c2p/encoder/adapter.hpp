#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "c2p/encoder/parameters.hpp"
#include "c2p/error.hpp"
#include "c2p/rng.hpp"

namespace c2p::nn {

/// Low-rank adapter hyperparameters. The delta added to a frozen projection W
/// is (alpha / rank) * B * A with A: rank x in, B: out x rank.
struct AdapterConfig {
  int rank = 6;
  double alpha = 6.0;
  double dropout = 0.8;
  std::vector<std::string> targets{"q_proj", "k_proj", "v_proj"};

  double scaling() const { return alpha / rank; }

  void validate() const {
    require(rank >= 1, ErrorKind::InvalidInput, "adapter rank must be >= 1");
    require(dropout >= 0.0 && dropout < 1.0, ErrorKind::InvalidInput, "adapter dropout must be in [0, 1)");
    require(!targets.empty(), ErrorKind::InvalidInput, "adapter targets must be non-empty");
    static const std::set<std::string> known{"q_proj", "k_proj", "v_proj", "out_proj"};
    for (const auto& t : targets)
      require(known.count(t) != 0, ErrorKind::InvalidInput, "unknown adapter target '" + t + "'");
  }

  bool targets_projection(const std::string& proj) const {
    return std::find(targets.begin(), targets.end(), proj) != targets.end();
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AdapterConfig, rank, alpha, dropout, targets)

/// Trainable low-rank factors keyed by the frozen weight they modify, e.g.
/// "encoder.layers.0.self_attn.q_proj.weight" owns
/// "encoder.layers.0.self_attn.q_proj.lora_A" and "...lora_B".
class AdapterSet {
 public:
  AdapterSet() = default;

  /// A is drawn uniform(+-1/sqrt(in)) and B starts at zero, so a fresh set
  /// leaves the wrapped model's output unchanged.
  AdapterSet(const AdapterConfig& config, const std::vector<std::pair<std::string, std::pair<int, int>>>& weights,
             std::uint64_t seed)
      : config_(config) {
    config_.validate();
    Rng rng(seed);
    for (const auto& [weight_name, shape] : weights) {
      const auto [out_dim, in_dim] = shape;
      const std::string base = stem(weight_name);
      const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
      store_.add(base + ".lora_A", random_uniform(rng, config_.rank, in_dim, bound), true);
      store_.add(base + ".lora_B", Matrix::Zero(out_dim, config_.rank), true);
      targets_.push_back(weight_name);
    }
  }

  /// Rebuilds a set from archived factors.
  static AdapterSet from_tensors(const AdapterConfig& config, const std::map<std::string, Matrix>& tensors) {
    config.validate();
    AdapterSet set;
    set.config_ = config;
    const std::string a_suffix = ".lora_A";
    for (const auto& [name, m] : tensors) {
      set.store_.add(name, m, true);
      if (name.size() > a_suffix.size() && name.compare(name.size() - a_suffix.size(), a_suffix.size(), a_suffix) == 0) {
        const std::string base = name.substr(0, name.size() - a_suffix.size());
        require(tensors.count(base + ".lora_B") != 0, ErrorKind::InvalidInput, "adapter " + base + " has no lora_B");
        require(m.rows() == config.rank, ErrorKind::InvalidInput, "adapter " + base + " rank differs from config");
        set.targets_.push_back(base + ".weight");
      }
    }
    require(set.store_.size() == 2 * set.targets_.size(), ErrorKind::InvalidInput, "unpaired adapter tensors");
    return set;
  }

  const AdapterConfig& config() const { return config_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }
  const std::vector<std::string>& adapted_weights() const { return targets_; }

  bool adapts(const std::string& weight_name) const {
    return std::find(targets_.begin(), targets_.end(), weight_name) != targets_.end();
  }

  const Parameter& down(const std::string& weight_name) const { return store_.at(stem(weight_name) + ".lora_A"); }
  const Parameter& up(const std::string& weight_name) const { return store_.at(stem(weight_name) + ".lora_B"); }

  /// scaling * B * A, shaped like the adapted weight.
  Matrix delta(const std::string& weight_name) const {
    return config_.scaling() * (up(weight_name).value * down(weight_name).value);
  }

  static std::string stem(const std::string& weight_name) {
    const std::string suffix = ".weight";
    if (weight_name.size() > suffix.size() &&
        weight_name.compare(weight_name.size() - suffix.size(), suffix.size(), suffix) == 0)
      return weight_name.substr(0, weight_name.size() - suffix.size());
    return weight_name;
  }

 private:
  AdapterConfig config_;
  ParameterStore store_;
  std::vector<std::string> targets_;
};

}  // namespace c2p::nn
