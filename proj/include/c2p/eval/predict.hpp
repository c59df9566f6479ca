#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "c2p/data/manifest.hpp"
#include "c2p/data/preprocess.hpp"
#include "c2p/encoder/adapter.hpp"
#include "c2p/encoder/backend.hpp"
#include "c2p/encoder/image_tower.hpp"
#include "c2p/eval/metrics.hpp"
#include "c2p/train/checkpoint.hpp"
#include "c2p/train/classifier.hpp"
#include "c2p/train/losses.hpp"

namespace c2p::eval {

namespace fs = std::filesystem;

struct DetectionResult {
  std::string image_id;
  std::string subset;
  int label = 0;
  double logit = 0.0;
  double probability = 0.5;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DetectionResult, image_id, subset, label, logit, probability)

/// Everything inference needs: an image tower (merged, or plain plus
/// adapters) and the linear head. There is deliberately no text tower here.
struct DetectionModel {
  nn::ImageTower tower;
  std::optional<nn::AdapterSet> adapters;
  train::LinearClassifier classifier;
  data::PreprocessPolicy preprocess;

  const nn::AdapterSet* adapter_ptr() const { return adapters ? &*adapters : nullptr; }

  /// Unnormalized image feature v for one preprocessed image.
  nn::RowVector feature(const data::ImageTensor& image) const {
    nn::Tape tape;
    return tower.forward(tape, image, adapter_ptr()).value().row(0);
  }
};

/// Loads a checkpoint for inference. With `merged` the folded export is used
/// (run `merge` first); otherwise the backbone is rebuilt and adapters attached.
inline DetectionModel load_detection_model(const fs::path& checkpoint_dir, bool merged) {
  train::Checkpoint ck = train::load_checkpoint(checkpoint_dir);
  DetectionModel model;
  model.classifier = ck.classifier;
  model.preprocess = ck.preprocess;
  model.preprocess.crop = data::CropMode::Center;
  if (merged) {
    if (!fs::exists(checkpoint_dir / train::kMergedFile))
      fail(ErrorKind::NotFound, "no merged export in " + checkpoint_dir.string() + "; run `c2p merge` first");
    model.tower = train::load_merged(checkpoint_dir, ck.backend.image);
  } else {
    model.tower = nn::make_image_tower(ck.backend);
    model.adapters = std::move(ck.adapters);
  }
  return model;
}

struct FlaggedPrediction {
  std::string image_id;
  std::string reason;
};

struct Predictions {
  std::vector<DetectionResult> results;
  std::vector<FlaggedPrediction> flagged;
};

/// Scores every record in manifest order. Unreadable images are flagged and
/// left out of the results.
inline Predictions predict(const data::DatasetManifest& manifest, const DetectionModel& model) {
  Predictions out;
  out.results.reserve(manifest.records.size());
  for (const auto& rec : manifest.records) {
    nn::RowVector v;
    try {
      v = model.feature(data::preprocess_image(data::load_image(rec.path), model.preprocess));
    } catch (const Error& e) {
      out.flagged.push_back({rec.image_id, e.what()});
      continue;
    }
    const double logit = model.classifier.logit(v);
    out.results.push_back({rec.image_id, rec.subset, rec.label, logit, train::sigmoid(logit)});
  }
  return out;
}

inline std::map<std::string, SubsetScores> group_by_subset(const std::vector<DetectionResult>& results) {
  std::map<std::string, SubsetScores> out;
  for (const auto& r : results) {
    out[r.subset].probabilities.push_back(r.probability);
    out[r.subset].labels.push_back(r.label);
  }
  return out;
}

inline MetricsReport evaluate(const Predictions& preds, double threshold = 0.5) {
  MetricsReport r = build_report(group_by_subset(preds.results), threshold);
  r.excluded = preds.flagged.size();
  return r;
}

inline void write_results_jsonl(const std::vector<DetectionResult>& results, const fs::path& path) {
  std::string text;
  for (const auto& r : results) text += nlohmann::json(r).dump() + "\n";
  train::write_text(path, text);
}

inline std::vector<DetectionResult> read_results_jsonl(const fs::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::NotFound, path.string());
  std::vector<DetectionResult> out;
  std::string line;
  while (std::getline(f, line))
    if (!line.empty()) out.push_back(nlohmann::json::parse(line).get<DetectionResult>());
  return out;
}

}  // namespace c2p::eval
