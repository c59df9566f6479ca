#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "c2p/data/preprocess.hpp"
#include "c2p/encoder/adapter.hpp"
#include "c2p/encoder/backend.hpp"
#include "c2p/encoder/image_tower.hpp"
#include "c2p/error.hpp"
#include "c2p/train/classifier.hpp"
#include "c2p/train/fit.hpp"
#include "c2p/version.hpp"

namespace c2p::train {

namespace fs = std::filesystem;

inline constexpr const char* kCheckpointMeta = "checkpoint.json";
inline constexpr const char* kAdapterFile = "adapters.c2pt";
inline constexpr const char* kClassifierFile = "classifier.c2pt";
inline constexpr const char* kMergedFile = "merged_image_tower.c2pt";
inline constexpr const char* kConfigSnapshot = "config.json";
inline constexpr const char* kTrainLog = "train_log.jsonl";
inline constexpr const char* kVersionStamp = "VERSION";

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::IoError, "cannot write " + path.string());
  f << text;
  if (!f) fail(ErrorKind::IoError, "short write to " + path.string());
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::NotFound, path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidInput, path.string() + ": " + e.what());
  }
}

/// Config snapshot plus tool-version stamp, written into every output directory.
inline void stamp_output_dir(const fs::path& dir, const nlohmann::json& config) {
  fs::create_directories(dir);
  write_text(dir / kConfigSnapshot, config.dump(2) + "\n");
  write_text(dir / kVersionStamp, std::string(kToolVersion) + "\n");
}

/// Training artifacts. Backbone weights are never stored: the toy backend is
/// rebuilt from its config, so only adapters and the head are persisted.
struct Checkpoint {
  nn::BackendConfig backend;
  nn::AdapterConfig adapter_config;
  data::PreprocessPolicy preprocess;
  TrainConfig train;
  nn::AdapterSet adapters;
  LinearClassifier classifier;
  std::vector<StepLog> curve;
  std::uint64_t text_tower_checksum = 0;
  std::uint64_t frozen_image_checksum = 0;
  nlohmann::json config_snapshot = nlohmann::json::object();

  nlohmann::json meta() const {
    return {{"format_version", kCheckpointFormat},
            {"tool_version", kToolVersion},
            {"backend", backend},
            {"adapter", adapter_config},
            {"preprocess", preprocess},
            {"train", train},
            {"files",
             {{"adapters", kAdapterFile}, {"classifier", kClassifierFile}, {"train_log", kTrainLog}}},
            {"text_tower_checksum", std::to_string(text_tower_checksum)},
            {"frozen_image_checksum", std::to_string(frozen_image_checksum)}};
  }

  void save(const fs::path& dir) const {
    stamp_output_dir(dir, config_snapshot);
    write_text(dir / kCheckpointMeta, meta().dump(2) + "\n");
    nn::save_archive(nn::to_tensor_map(adapters.parameters()), dir / kAdapterFile);
    nn::save_archive(nn::to_tensor_map(classifier.parameters()), dir / kClassifierFile);
    std::string log;
    for (const auto& s : curve) log += nlohmann::json(s).dump() + "\n";
    write_text(dir / kTrainLog, log);
  }
};

inline nlohmann::json load_checkpoint_meta(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorKind::NotFound, "checkpoint directory " + dir.string());
  nlohmann::json meta = read_json(dir / kCheckpointMeta);
  const int version = meta.value("format_version", 0);
  if (version != kCheckpointFormat)
    fail(ErrorKind::VersionError, "checkpoint " + dir.string() + " has format " + std::to_string(version) +
                                      " but this build reads format " + std::to_string(kCheckpointFormat) +
                                      "; retrain with this version or open it with the c2p release that wrote it (" +
                                      meta.value("tool_version", std::string("unknown")) + ")");
  return meta;
}

inline Checkpoint load_checkpoint(const fs::path& dir) {
  const nlohmann::json meta = load_checkpoint_meta(dir);
  Checkpoint ck;
  ck.backend = meta.at("backend").get<nn::BackendConfig>();
  ck.adapter_config = meta.at("adapter").get<nn::AdapterConfig>();
  ck.preprocess = meta.at("preprocess").get<data::PreprocessPolicy>();
  ck.train = meta.at("train").get<TrainConfig>();
  ck.text_tower_checksum = std::stoull(meta.at("text_tower_checksum").get<std::string>());
  ck.frozen_image_checksum = std::stoull(meta.at("frozen_image_checksum").get<std::string>());
  ck.adapters = nn::AdapterSet::from_tensors(ck.adapter_config, nn::load_archive(dir / kAdapterFile));
  ck.classifier = LinearClassifier::from_tensors(nn::load_archive(dir / kClassifierFile));
  if (fs::exists(dir / kConfigSnapshot)) ck.config_snapshot = read_json(dir / kConfigSnapshot);
  if (std::ifstream log(dir / kTrainLog); log) {
    std::string line;
    while (std::getline(log, line))
      if (!line.empty()) ck.curve.push_back(nlohmann::json::parse(line).get<StepLog>());
  }
  return ck;
}

/// Writes the merged image tower next to the checkpoint and returns it.
inline nn::ImageTower export_merged(const fs::path& dir, const nn::ImageTower& merged) {
  require(merged.merged(), ErrorKind::InvalidInput, "export_merged expects a merged tower");
  nn::save_archive(nn::to_tensor_map(merged.parameters()), dir / kMergedFile);
  return merged;
}

inline nn::ImageTower load_merged(const fs::path& dir, const nn::ImageTowerConfig& config) {
  return nn::ImageTower::from_tensors(config, nn::load_archive(dir / kMergedFile), true);
}

}  // namespace c2p::train
