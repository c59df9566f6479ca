#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "c2p/encoder/parameters.hpp"
#include "c2p/encoder/tape.hpp"
#include "c2p/error.hpp"
#include "c2p/rng.hpp"

namespace c2p::analysis {

/// Turns an embedding-space vector into text.
class FeatureDecoder {
 public:
  virtual ~FeatureDecoder() = default;
  virtual std::string decode(const nn::RowVector& feature) const = 0;
};

/// Offline decoder. Each vocabulary word owns a seeded vector of norm
/// `word_norm`; decoding greedily subtracts the word whose vector is nearest
/// (Euclidean) to the remaining residual, stopping once no word reduces the
/// residual norm or `max_words` is reached. Euclidean matching makes the
/// output depend on the feature's scale, not only its direction.
class StubFeatureDecoder final : public FeatureDecoder {
 public:
  StubFeatureDecoder(int dim, std::uint64_t seed = 123, int max_words = 6, double word_norm = 1.0)
      : max_words_(max_words), word_norm_(word_norm) {
    Rng rng(seed);
    words_ = {"cat",   "dog",    "horse",  "car",   "chair", "table",  "street", "woman", "man",    "people",
              "photo", "picture", "room",  "field", "road",  "water",  "grass",  "sky",   "building", "things",
              "sign",  "bench",  "train", "bird",  "bed",   "kitchen", "window", "light", "group",  "different"};
    vectors_ = nn::random_normal(rng, static_cast<Eigen::Index>(words_.size()), dim, 1.0);
    for (Eigen::Index i = 0; i < vectors_.rows(); ++i) vectors_.row(i) *= word_norm_ / vectors_.row(i).norm();
  }

  /// Norm of the features this decoder was built for.
  double expected_norm() const { return word_norm_; }
  int dim() const { return static_cast<int>(vectors_.cols()); }

  std::string decode(const nn::RowVector& feature) const override {
    require(feature.size() == vectors_.cols(), ErrorKind::DecodeError, "feature dimension differs from decoder");
    require(feature.allFinite(), ErrorKind::DecodeError, "non-finite feature");
    nn::RowVector residual = feature;
    std::string text = "a picture of";
    int emitted = 0;
    for (int step = 0; step < max_words_; ++step) {
      Eigen::Index best = -1;
      double best_dist = residual.norm();
      for (Eigen::Index w = 0; w < vectors_.rows(); ++w) {
        const double d = (residual - vectors_.row(w)).norm();
        if (d < best_dist) {
          best_dist = d;
          best = w;
        }
      }
      if (best < 0) break;
      residual -= vectors_.row(best);
      text += " " + words_[static_cast<std::size_t>(best)];
      ++emitted;
    }
    if (emitted == 0) text += " nothing";
    return text;
  }

 private:
  std::vector<std::string> words_;
  nn::Matrix vectors_;
  int max_words_;
  double word_norm_;
};

/// Writes the feature as a JSON array to a temp file and runs
/// `<command> <file>`; stdout is the decoded text.
class ExternalCommandDecoder final : public FeatureDecoder {
 public:
  explicit ExternalCommandDecoder(std::string command, std::filesystem::path scratch_dir = {})
      : command_(std::move(command)),
        scratch_(scratch_dir.empty() ? std::filesystem::temp_directory_path() : std::move(scratch_dir)) {}

  std::string decode(const nn::RowVector& feature) const override {
    const auto path = scratch_ / ("c2p_feature_" + std::to_string(counter_++) + ".json");
    {
      std::ofstream f(path);
      if (!f) fail(ErrorKind::DecodeError, "cannot write " + path.string());
      f << nlohmann::json(std::vector<double>(feature.data(), feature.data() + feature.size())).dump();
    }
    const std::string cmd = command_ + " '" + path.string() + "'";
    std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
    if (!pipe) fail(ErrorKind::DecodeError, "cannot run decoder command");
    std::string out;
    std::array<char, 512> buf{};
    while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe.get()) != nullptr) out += buf.data();
    const int status = pclose(pipe.release());
    std::filesystem::remove(path);
    if (status != 0) fail(ErrorKind::DecodeError, "decoder command exited with status " + std::to_string(status));
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
    return out;
  }

 private:
  std::string command_;
  std::filesystem::path scratch_;
  mutable std::size_t counter_ = 0;
};

/// Provider failures of any kind surface as DecodeError.
inline std::string decode_feature_to_text(const nn::RowVector& feature, const FeatureDecoder& decoder) {
  try {
    return decoder.decode(feature);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::DecodeError) throw;
    fail(ErrorKind::DecodeError, e.what());
  } catch (const std::exception& e) {
    fail(ErrorKind::DecodeError, e.what());
  }
}

}  // namespace c2p::analysis
