#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <utility>

#include "c2p/data/manifest.hpp"
#include "c2p/data/preprocess.hpp"
#include "c2p/error.hpp"
#include "c2p/rng.hpp"

namespace c2p::caption {

/// Source of raw image captions.
class CaptionProvider {
 public:
  virtual ~CaptionProvider() = default;
  virtual std::string caption(const data::ImageTensor& image, const data::ImageRecord& record) = 0;
  virtual std::string name() const = 0;
};

/// Returns the same text for every image.
class FixedCaptionProvider final : public CaptionProvider {
 public:
  explicit FixedCaptionProvider(std::string text = "a test image") : text_(std::move(text)) {}
  std::string caption(const data::ImageTensor&, const data::ImageRecord&) override { return text_; }
  std::string name() const override { return "fixed"; }

 private:
  std::string text_;
};

/// Offline stand-in for a captioning model. Builds a short sentence from
/// coarse image statistics (brightness, dominant channel, edge energy), so
/// visually similar images share words and the output is a pure function of
/// the pixels and the seed.
class StubCaptionProvider final : public CaptionProvider {
 public:
  explicit StubCaptionProvider(std::uint64_t seed = 123) : seed_(seed) {}

  std::string caption(const data::ImageTensor& image, const data::ImageRecord&) override {
    static constexpr std::array<const char*, 3> kColor{"red", "green", "blue"};
    static constexpr std::array<const char*, 4> kLight{"dark", "dim", "bright", "sunlit"};
    static constexpr std::array<const char*, 4> kTexture{"smooth", "soft", "busy", "cluttered"};
    static constexpr std::array<const char*, 8> kNoun{"cat", "dog", "horse", "car", "chair", "table", "street",
                                                      "woman"};
    static constexpr std::array<const char*, 6> kPlace{"room", "field", "road", "kitchen", "park", "beach"};

    const int s = image.size;
    std::array<double, 3> mean{};
    double edges = 0.0;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
          mean[c] += image.at(c, y, x);
          if (x + 1 < s) edges += std::abs(image.at(c, y, x + 1) - image.at(c, y, x));
          if (y + 1 < s) edges += std::abs(image.at(c, y + 1, x) - image.at(c, y, x));
        }
    const double n = static_cast<double>(s) * s;
    for (double& m : mean) m /= n;
    edges /= 6.0 * n;
    const double brightness = (mean[0] + mean[1] + mean[2]) / 3.0;

    const std::size_t color = static_cast<std::size_t>(std::max_element(mean.begin(), mean.end()) - mean.begin());
    const std::size_t light = bin(brightness, -1.0, 1.0, kLight.size());
    const std::size_t texture = bin(edges, 0.0, 1.0, kTexture.size());
    Rng rng(seed_ ^ Rng::mix(color * 131 + light * 17 + texture));
    const char* noun = kNoun[rng.below(kNoun.size())];
    const char* place = kPlace[rng.below(kPlace.size())];
    return std::string("a ") + kLight[light] + " " + kTexture[texture] + " photo of a " + kColor[color] + " " +
           noun + " in a " + place;
  }

  std::string name() const override { return "stub"; }

 private:
  static std::size_t bin(double v, double lo, double hi, std::size_t bins) {
    const double t = std::clamp((v - lo) / (hi - lo), 0.0, 0.999999);
    return static_cast<std::size_t>(t * static_cast<double>(bins));
  }

  std::uint64_t seed_;
};

/// Runs `<command> <image path>` and takes its trimmed stdout as the caption.
/// This is how an external captioning model (e.g. a ClipCap script) is wired in.
class ExternalCommandProvider final : public CaptionProvider {
 public:
  explicit ExternalCommandProvider(std::string command) : command_(std::move(command)) {}

  std::string caption(const data::ImageTensor&, const data::ImageRecord& record) override {
    const std::string cmd = command_ + " " + shell_quote(record.path);
    std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
    if (!pipe) fail(ErrorKind::IoError, "cannot run caption command");
    std::string out;
    std::array<char, 512> buf{};
    while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe.get()) != nullptr) out += buf.data();
    const int status = pclose(pipe.release());
    if (status != 0) fail(ErrorKind::IoError, "caption command exited with status " + std::to_string(status));
    return out;
  }

  std::string name() const override { return "external"; }

  static std::string shell_quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
  }

 private:
  std::string command_;
};

}  // namespace c2p::caption
