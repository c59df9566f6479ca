#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "c2p/data/preprocess.hpp"
#include "c2p/encoder/adapter.hpp"
#include "c2p/encoder/embedding.hpp"
#include "c2p/encoder/image_tower.hpp"
#include "c2p/encoder/text_tower.hpp"
#include "c2p/error.hpp"

namespace c2p::nn {

enum class BackendMode { ToyDeterministic, PretrainedViTL14 };

NLOHMANN_JSON_SERIALIZE_ENUM(BackendMode, {{BackendMode::ToyDeterministic, "toy"},
                                           {BackendMode::PretrainedViTL14, "pretrained"}})

struct BackendConfig {
  BackendMode mode = BackendMode::ToyDeterministic;
  std::uint64_t seed = 123;
  ImageTowerConfig image;
  TextTowerConfig text;

  void validate() const {
    image.validate();
    text.validate();
    require(image.embed_dim == text.embed_dim, ErrorKind::InvalidInput,
            "image and text towers must share the embedding dimension");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BackendConfig, mode, seed, image, text)

inline constexpr std::uint64_t kImageTowerSalt = 0x1A;
inline constexpr std::uint64_t kTextTowerSalt = 0x7E;

inline void require_toy(const BackendConfig& config) {
  if (config.mode == BackendMode::PretrainedViTL14)
    fail(ErrorKind::Unsupported,
         "the pretrained ViT-L/14 backend needs exported CLIP weights and tokenizer, which this build does not "
         "bundle; use --backend toy");
}

/// The towers are built independently so inference can construct the image
/// side without ever materializing text weights.
inline ImageTower make_image_tower(const BackendConfig& config) {
  config.validate();
  require_toy(config);
  return ImageTower(config.image, Rng(config.seed).fork(kImageTowerSalt).next_u64());
}

inline TextTower make_text_tower(const BackendConfig& config) {
  config.validate();
  require_toy(config);
  return TextTower(config.text, Rng(config.seed).fork(kTextTowerSalt).next_u64());
}

struct Backend {
  BackendConfig config;
  ImageTower image;
  TextTower text;

  explicit Backend(const BackendConfig& c) : config(c), image(make_image_tower(c)), text(make_text_tower(c)) {}
  int dim() const { return config.image.embed_dim; }
};

/// Text features u. The text tower is frozen; nothing here records gradients.
inline EmbeddingBatch encode_text(const TextTower& tower, const std::vector<std::string>& texts) {
  if (texts.empty()) return EmbeddingBatch{Matrix(0, tower.embed_dim()), false};
  return EmbeddingBatch{tower.encode(texts), false};
}

/// Image features v, optionally through adapters.
inline EmbeddingBatch encode_image(const ImageTower& tower, std::span<const data::ImageTensor> images,
                                   const AdapterSet* adapters = nullptr, bool training = false,
                                   Rng* dropout_rng = nullptr) {
  if (images.empty()) return EmbeddingBatch{Matrix(0, tower.embed_dim()), false};
  Matrix out(static_cast<Eigen::Index>(images.size()), tower.embed_dim());
  ForwardOptions opts{training, dropout_rng};
  for (std::size_t i = 0; i < images.size(); ++i) {
    Tape tape;
    out.row(static_cast<Eigen::Index>(i)) = tower.forward(tape, images[i], adapters, opts).value();
  }
  return EmbeddingBatch{std::move(out), false};
}

}  // namespace c2p::nn
