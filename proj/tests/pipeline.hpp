#pragma once

// Helpers shared by the training tests and the acceptance binary.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <vector>

#include "c2p/c2p.hpp"

namespace c2p::test {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

/// Compares tape gradients of the full objective against central differences
/// for every adapter and classifier scalar. The dropout stream is reseeded on
/// each evaluation so all evaluations share one mask.
inline GradCheckResult gradient_check(const nn::ImageTower& tower, nn::AdapterSet& adapters,
                                      train::LinearClassifier& classifier,
                                      const std::vector<data::ImageTensor>& images, const nn::Matrix& text,
                                      const std::vector<int>& labels, const train::TrainConfig& config,
                                      std::uint64_t dropout_seed = 77, double h = 1e-5) {
  auto loss_value = [&]() {
    nn::Tape tape;
    Rng rng(dropout_seed);
    return train::batch_loss(tape, tower, &adapters, classifier, images, text, labels, config, {true, &rng})
        .total.value()(0, 0);
  };

  nn::Tape tape;
  Rng rng(dropout_seed);
  auto loss = train::batch_loss(tape, tower, &adapters, classifier, images, text, labels, config, {true, &rng});
  tape.backward(loss.total);

  GradCheckResult out;
  auto check_store = [&](nn::ParameterStore& store) {
    for (auto& [name, p] : store) {
      const nn::Matrix analytic = tape.grad_of(p);
      for (Eigen::Index i = 0; i < p.value.size(); ++i) {
        double& x = p.value.data()[i];
        const double saved = x;
        x = saved + h;
        const double up = loss_value();
        x = saved - h;
        const double down = loss_value();
        x = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic.data()[i];
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
        if (rel > out.max_rel_error) {
          out.max_rel_error = rel;
          out.worst = name + "[" + std::to_string(i) + "]";
        }
        ++out.checked;
      }
    }
  };
  check_store(adapters.parameters());
  check_store(classifier.parameters());
  return out;
}

/// Gives every adapter and head parameter a random value so no gradient is
/// trivially zero.
inline void randomize(nn::ParameterStore& store, std::uint64_t seed, double sd) {
  Rng rng(seed);
  for (auto& [_, p] : store) p.value = nn::random_normal(rng, p.value.rows(), p.value.cols(), sd);
}

/// Settings for the synthetic end-to-end run. The batch is small so one epoch
/// over the synthetic set gives a few hundred optimizer steps.
struct PipelineSettings {
  int train_per_class = 1024;
  int test_per_class = 200;
  double artifact_amplitude = 40.0;
  int batch_size = 8;
  std::uint64_t seed = 123;
};

struct PipelineOutcome {
  eval::MetricsReport report;
  eval::Predictions predictions;
  train::TrainResult trained;
  std::uint64_t merged_checksum = 0;
  std::uint64_t frozen_image_before = 0, frozen_image_after = 0;
  std::uint64_t text_before = 0, text_after = 0;
  std::size_t merged_parameter_count = 0, backbone_parameter_count = 0;
  std::vector<caption::EnhancedCaption> enhanced;
  caption::CaptionCache captions;
  nn::ImageTower base, merged;
  data::DatasetManifest test_set;
  data::PreprocessPolicy policy;
  double seconds = 0.0;
};

inline std::uint64_t frozen_image_checksum(const nn::ImageTower& tower) {
  return nn::checksum(tower.parameters());
}

/// scan -> caption (stub) -> enhance -> train (toy) -> merge -> eval
inline PipelineOutcome run_synthetic_pipeline(const std::filesystem::path& work, const PipelineSettings& s) {
  const auto t0 = std::chrono::steady_clock::now();
  std::filesystem::remove_all(work);
  data::write_synthetic_dataset(work / "train", {32, s.train_per_class, s.train_per_class, s.artifact_amplitude, s.seed});
  data::write_synthetic_dataset(work / "test",
                                {32, s.test_per_class, s.test_per_class, s.artifact_amplitude, s.seed + 1000});
  auto train_set = data::scan_dataset(work / "train", data::Layout::Flat, data::Split::Train, {});
  auto test_set = data::scan_dataset(work / "test", data::Layout::Flat, data::Split::Test, {});

  data::PreprocessPolicy policy;
  policy.target_size = 32;
  caption::StubCaptionProvider provider(s.seed);
  caption::CaptionCache cache;
  caption::generate_captions(train_set, provider, policy, cache, nullptr);

  PipelineOutcome out;
  caption::PromptPair prompts;
  out.enhanced = caption::enhance_all(cache, prompts);

  nn::BackendConfig bc;
  bc.seed = s.seed;
  nn::Backend backend(bc);
  train::TrainConfig tc;
  tc.seed = s.seed;
  tc.batch_size = s.batch_size;
  out.frozen_image_before = frozen_image_checksum(backend.image);
  out.text_before = nn::checksum(backend.text.parameters());
  out.trained = train::fit(train_set, cache, prompts, backend.image, backend.text, nn::AdapterConfig{}, tc, policy);
  out.frozen_image_after = frozen_image_checksum(backend.image);
  out.text_after = nn::checksum(backend.text.parameters());

  nn::ImageTower merged = nn::merge_adapters(backend.image, out.trained.adapters);
  out.merged_checksum = nn::checksum(merged.parameters());
  out.merged_parameter_count = merged.parameter_count();
  out.backbone_parameter_count = backend.image.parameter_count();

  eval::DetectionModel model{merged, std::nullopt, out.trained.classifier, policy};
  out.predictions = eval::predict(test_set, model);
  out.report = eval::evaluate(out.predictions, 0.5);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  out.captions = std::move(cache);
  out.base = backend.image;
  out.merged = std::move(merged);
  out.test_set = std::move(test_set);
  out.policy = policy;
  return out;
}

}  // namespace c2p::test
