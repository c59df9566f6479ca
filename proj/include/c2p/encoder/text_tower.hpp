#pragma once

#include <cctype>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "c2p/encoder/parameters.hpp"
#include "c2p/error.hpp"
#include "c2p/rng.hpp"

namespace c2p::nn {

struct TextTowerConfig {
  int vocab_size = 4096;
  int width = 32;
  int context_length = 77;
  int embed_dim = 32;

  void validate() const {
    require(vocab_size > 0 && width > 0 && context_length > 0 && embed_dim > 0, ErrorKind::InvalidInput,
            "bad text tower dimensions");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TextTowerConfig, vocab_size, width, context_length, embed_dim)

/// Lowercased runs of ASCII letters and digits.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// Frozen toy text encoder with a closed form:
///
///   tokens  = tokenize(text)[0 : context_length]   (empty text -> one "" token)
///   pooled  = mean_k( E[fnv1a64(token_k) mod V] + P[k] )
///   u       = pooled * T^T
///
/// E (V x width), P (context x width) and T (embed_dim x width) are drawn from
/// the seed. Truncation keeps the head of the sequence, so a prompt prefix
/// always survives.
class TextTower {
 public:
  TextTower() = default;

  TextTower(const TextTowerConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    Rng rng(seed);
    store_.add("token_embedding.weight", random_normal(rng, config_.vocab_size, config_.width, 1.0));
    store_.add("position_embedding.weight", random_normal(rng, config_.context_length, config_.width, 0.01));
    store_.add("text_projection.weight", random_normal(rng, config_.embed_dim, config_.width,
                                                       1.0 / std::sqrt(static_cast<double>(config_.width))));
  }

  const TextTowerConfig& config() const { return config_; }
  const ParameterStore& parameters() const { return store_; }
  int embed_dim() const { return config_.embed_dim; }

  std::size_t bucket(std::string_view token) const {
    return static_cast<std::size_t>(fnv1a64(token) % static_cast<std::uint64_t>(config_.vocab_size));
  }

  std::vector<std::string> tokens(std::string_view text) const {
    auto toks = tokenize(text);
    if (toks.size() > static_cast<std::size_t>(config_.context_length)) toks.resize(config_.context_length);
    if (toks.empty()) toks.emplace_back();
    return toks;
  }

  RowVector encode_one(std::string_view text) const {
    const auto toks = tokens(text);
    const Matrix& emb = store_.at("token_embedding.weight").value;
    const Matrix& pos = store_.at("position_embedding.weight").value;
    RowVector pooled = RowVector::Zero(config_.width);
    for (std::size_t k = 0; k < toks.size(); ++k)
      pooled += emb.row(static_cast<Eigen::Index>(bucket(toks[k]))) + pos.row(static_cast<Eigen::Index>(k));
    pooled /= static_cast<double>(toks.size());
    return pooled * store_.at("text_projection.weight").value.transpose();
  }

  /// N x embed_dim.
  Matrix encode(const std::vector<std::string>& texts) const {
    Matrix out(static_cast<Eigen::Index>(texts.size()), config_.embed_dim);
    for (std::size_t i = 0; i < texts.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = encode_one(texts[i]);
    return out;
  }

 private:
  TextTowerConfig config_;
  ParameterStore store_;
};

}  // namespace c2p::nn
