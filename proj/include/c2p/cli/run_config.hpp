#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "c2p/caption/enhance.hpp"
#include "c2p/data/manifest.hpp"
#include "c2p/data/preprocess.hpp"
#include "c2p/encoder/adapter.hpp"
#include "c2p/encoder/backend.hpp"
#include "c2p/train/checkpoint.hpp"
#include "c2p/train/fit.hpp"
#include "c2p/version.hpp"

namespace c2p::cli {

/// Everything one pipeline invocation needs. Loaded from a JSON file, then
/// overridden by command-line flags; the effective value is written next to
/// every output.
struct RunConfig {
  std::string root;                  ///< dataset root for `scan`
  std::string layout = "flat";
  std::string split = "test";
  std::vector<std::string> classes;  ///< optional class filter
  std::string manifest;              ///< manifest JSONL consumed by later stages
  std::string captions;              ///< caption cache JSONL
  std::string checkpoint;            ///< checkpoint directory
  std::string provider = "stub";     ///< stub | fixed | command:<shell command>
  caption::PromptPair prompts;
  nn::AdapterConfig adapter;
  train::TrainConfig train;
  nn::BackendConfig backend;
  data::PreprocessPolicy preprocess = [] {
    data::PreprocessPolicy p;
    p.target_size = nn::ImageTowerConfig{}.image_size;
    return p;
  }();
  double threshold = 0.5;
  std::string out;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RunConfig, root, layout, split, classes, manifest, captions,
                                                checkpoint, provider, prompts, adapter, train, backend, preprocess,
                                                threshold, out)

inline RunConfig load_run_config(const std::filesystem::path& path) {
  try {
    return train::read_json(path).get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidInput, "run config " + path.string() + ": " + e.what());
  }
}

/// Checks that the pieces a stage depends on agree with each other.
inline void validate(const RunConfig& c) {
  data::parse_layout(c.layout);
  data::parse_split(c.split);
  c.prompts.validate();
  c.adapter.validate();
  c.train.validate();
  c.backend.validate();
  nn::require_toy(c.backend);  // fail before touching any input
  c.preprocess.validate();
  require(c.preprocess.target_size == c.backend.image.image_size, ErrorKind::InvalidInput,
          "preprocess.target_size must equal backend.image.image_size");
  require(c.threshold > 0.0 && c.threshold < 1.0, ErrorKind::InvalidInput, "threshold must lie in (0, 1)");
}

/// Directory for caches shared between runs, from C2P_CACHE_DIR.
inline std::filesystem::path cache_dir() {
  if (const char* env = std::getenv("C2P_CACHE_DIR"); env != nullptr && *env != '\0') return env;
  return {};
}

/// Writes the config snapshot for a single-file output as `<file>.meta.json`.
inline void stamp_output_file(const std::filesystem::path& file, const nlohmann::json& snapshot) {
  train::write_text(file.string() + ".meta.json",
                    nlohmann::json{{"tool_version", kToolVersion}, {"config", snapshot}}.dump(2) + "\n");
}

}  // namespace c2p::cli
