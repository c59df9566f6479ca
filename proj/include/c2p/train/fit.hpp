#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "c2p/caption/cache.hpp"
#include "c2p/caption/enhance.hpp"
#include "c2p/data/manifest.hpp"
#include "c2p/data/preprocess.hpp"
#include "c2p/encoder/adapter.hpp"
#include "c2p/encoder/image_tower.hpp"
#include "c2p/encoder/text_tower.hpp"
#include "c2p/train/adam.hpp"
#include "c2p/train/classifier.hpp"
#include "c2p/train/losses.hpp"

namespace c2p::train {

struct TrainConfig {
  double learning_rate = 4e-4;
  int batch_size = 128;
  int epochs = 1;
  double alpha = 8.0;  ///< weight of the classification term
  std::uint64_t seed = 123;
  double temperature = 1.0;
  bool normalize_embeddings = true;  ///< L2-normalize u and v before the contrastive term
  AdamConfig adam;

  void validate() const {
    require(alpha >= 0.0, ErrorKind::InvalidInput, "alpha must be >= 0");
    require(batch_size >= 2, ErrorKind::InvalidInput, "batch_size must be >= 2 for in-batch negatives");
    require(epochs >= 1, ErrorKind::InvalidInput, "epochs must be >= 1");
    require(learning_rate > 0.0, ErrorKind::InvalidInput, "learning_rate must be positive");
    require(temperature > 0.0, ErrorKind::InvalidInput, "temperature must be positive");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, learning_rate, batch_size, epochs, alpha, seed,
                                                temperature, normalize_embeddings, adam)

struct StepLog {
  int step = 0;
  int epoch = 0;
  double contrastive = 0.0;
  double classification = 0.0;
  double total = 0.0;

  bool operator==(const StepLog&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(StepLog, step, epoch, contrastive, classification, total)

struct BatchLoss {
  nn::Var total;
  nn::Var contrastive;
  nn::Var classification;
};

/// Builds the full objective for one batch on `tape`:
///   contrastive(u, v) + alpha * BCE(classifier(v), labels)
/// The classifier reads the raw image features; the contrastive term reads
/// normalized ones when the config says so. `text_features` is constant.
inline BatchLoss batch_loss(nn::Tape& tape, const nn::ImageTower& tower, const nn::AdapterSet* adapters,
                            const LinearClassifier& classifier, std::span<const data::ImageTensor> images,
                            const nn::Matrix& text_features, const std::vector<int>& labels,
                            const TrainConfig& config, const nn::ForwardOptions& opts) {
  nn::Var v = tower.forward_batch(tape, images, adapters, opts);
  nn::Var u = tape.constant(text_features);
  nn::Var v_c = config.normalize_embeddings ? nn::l2_normalize_rows(v) : v;
  nn::Var u_c = config.normalize_embeddings ? nn::l2_normalize_rows(u) : u;
  nn::Var lc = contrastive_loss(u_c, v_c, config.temperature);
  nn::Var lb = classification_loss(classifier.forward(v), labels);
  return {nn::add(lc, nn::scale(lb, config.alpha)), lc, lb};
}

struct TrainResult {
  nn::AdapterSet adapters;
  LinearClassifier classifier;
  std::vector<StepLog> curve;
  std::vector<std::string> skipped;  ///< records without a caption
};

struct FitHooks {
  std::function<void(const StepLog&)> on_step;
  std::filesystem::path diagnostics_dir;  ///< NaN snapshots go here when set
  std::ostream* warnings = nullptr;
};

/// Seed streams split off the run seed.
struct SeedPlan {
  std::uint64_t shuffle, dropout, crop, adapters;
  explicit SeedPlan(std::uint64_t seed) {
    const Rng root(seed);
    shuffle = root.fork(1).next_u64();
    dropout = root.fork(2).next_u64();
    crop = root.fork(3).next_u64();
    adapters = root.fork(4).next_u64();
  }
};

/// Concept injection: trains the adapters and the classifier while every
/// backbone weight and the whole text tower stay frozen. Partial batches are
/// dropped, so a set smaller than one batch yields the initial state.
inline TrainResult fit(const data::DatasetManifest& manifest, const caption::CaptionCache& captions,
                       const caption::PromptPair& prompts, const nn::ImageTower& tower, const nn::TextTower& text,
                       const nn::AdapterConfig& adapter_config, const TrainConfig& config,
                       const data::PreprocessPolicy& policy, const FitHooks& hooks = {}) {
  config.validate();
  prompts.validate();
  require(!tower.merged(), ErrorKind::InvalidInput, "cannot train adapters on a merged tower");
  require(tower.embed_dim() == text.embed_dim(), ErrorKind::InvalidInput, "tower dimensions differ");

  const SeedPlan seeds(config.seed);
  TrainResult result{tower.make_adapters(adapter_config, seeds.adapters), LinearClassifier(tower.embed_dim()), {},
                     {}};

  std::vector<const data::ImageRecord*> usable;
  std::vector<std::string> texts;
  for (const auto& rec : manifest.records) {
    const auto* cap = captions.find(rec.image_id);
    if (cap == nullptr) {
      result.skipped.push_back(rec.image_id);
      if (hooks.warnings) *hooks.warnings << "warning: no caption for " << rec.image_id << ", skipping\n";
      continue;
    }
    usable.push_back(&rec);
    texts.push_back(caption::enhance_caption(cap->caption, rec.label, prompts).text);
  }

  data::PreprocessPolicy train_policy = policy;
  train_policy.crop = data::CropMode::Random;
  Rng shuffle_rng(seeds.shuffle), dropout_rng(seeds.dropout), crop_rng(seeds.crop);
  Adam adam(config.learning_rate, config.adam);

  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  const std::size_t steps_per_epoch = usable.size() / bs;
  int step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(usable.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle_rng.shuffle(order);

    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      std::vector<data::ImageTensor> images;
      std::vector<std::string> batch_texts;
      std::vector<int> labels;
      std::vector<std::string> ids;
      for (std::size_t k = b * bs; k < (b + 1) * bs; ++k) {
        const auto& rec = *usable[order[k]];
        images.push_back(data::preprocess_image(data::load_image(rec.path), train_policy, &crop_rng));
        batch_texts.push_back(texts[order[k]]);
        labels.push_back(rec.label);
        ids.push_back(rec.image_id);
      }

      nn::Tape tape;
      std::optional<BatchLoss> loss;
      StepLog log{step, epoch, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
                  std::numeric_limits<double>::quiet_NaN()};
      try {
        loss = batch_loss(tape, tower, &result.adapters, result.classifier, images, text.encode(batch_texts), labels,
                          config, nn::ForwardOptions{true, &dropout_rng});
        log.contrastive = loss->contrastive.value()(0, 0);
        log.classification = loss->classification.value()(0, 0);
        log.total = loss->total.value()(0, 0);
      } catch (const Error& e) {
        // a NaN feature can trip a numerical guard before the loss exists
        if (e.kind() != ErrorKind::NumericalError) throw;
      }
      if (!std::isfinite(log.total)) {
        if (!hooks.diagnostics_dir.empty()) {
          std::filesystem::create_directories(hooks.diagnostics_dir);
          std::ofstream f(hooks.diagnostics_dir / "nan_diagnostic.json");
          f << nlohmann::json{{"step", log.step},
                              {"epoch", log.epoch},
                              {"contrastive", std::to_string(log.contrastive)},
                              {"classification", std::to_string(log.classification)},
                              {"image_ids", ids}}
                   .dump(2)
            << '\n';
        }
        fail(ErrorKind::NumericalError, "non-finite loss at step " + std::to_string(step));
      }

      tape.backward(loss->total);
      nn::collect_grads(tape, result.adapters.parameters());
      nn::collect_grads(tape, result.classifier.parameters());
      adam.step(result.adapters.parameters(), "adapters");
      adam.step(result.classifier.parameters(), "classifier");

      result.curve.push_back(log);
      if (hooks.on_step) hooks.on_step(log);
      ++step;
    }
  }
  return result;
}

}  // namespace c2p::train
