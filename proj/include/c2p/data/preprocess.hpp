#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"

#include "c2p/data/image.hpp"
#include "c2p/error.hpp"
#include "c2p/rng.hpp"

namespace c2p::data {

enum class SmallImageRule { TileThenCrop, Resize };
enum class CropMode { Center, Random };

NLOHMANN_JSON_SERIALIZE_ENUM(SmallImageRule, {{SmallImageRule::TileThenCrop, "tile_then_crop"},
                                              {SmallImageRule::Resize, "resize"}})
NLOHMANN_JSON_SERIALIZE_ENUM(CropMode, {{CropMode::Center, "center"}, {CropMode::Random, "random"}})

/// CLIP pretraining statistics.
inline constexpr std::array<double, 3> kClipMean{0.48145466, 0.4578275, 0.40821073};
inline constexpr std::array<double, 3> kClipStd{0.26862954, 0.26130258, 0.27577711};

struct PreprocessPolicy {
  int target_size = 224;
  SmallImageRule small_image_rule = SmallImageRule::TileThenCrop;
  CropMode crop = CropMode::Center;
  std::array<double, 3> mean = kClipMean;
  std::array<double, 3> std = kClipStd;

  void validate() const {
    require(target_size > 0, ErrorKind::InvalidInput, "target_size must be positive");
    for (double s : std) require(s > 0.0, ErrorKind::InvalidInput, "normalization std must be positive");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PreprocessPolicy, target_size, small_image_rule, crop, mean, std)

/// Planar channel-major tensor (C x S x S).
struct ImageTensor {
  int size = 0;
  std::vector<double> data;

  ImageTensor() = default;
  explicit ImageTensor(int s) : size(s), data(static_cast<std::size_t>(3) * s * s, 0.0) {}

  double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * size + y) * size + x]; }
  double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * size + y) * size + x]; }
};

/// Repeat the raster along each axis until both sides reach `min_side`.
inline RgbImage tile_to_cover(const RgbImage& src, int min_side) {
  const int reps_x = (std::max(src.width, min_side) + src.width - 1) / src.width;
  const int reps_y = (std::max(src.height, min_side) + src.height - 1) / src.height;
  RgbImage out(src.width * reps_x, src.height * reps_y);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = src.at(x % src.width, y % src.height, c);
  return out;
}

/// Bilinear resize so the shorter side equals `side` (half-pixel centers).
inline RgbImage resize_shorter_side(const RgbImage& src, int side) {
  const double scale = static_cast<double>(side) / std::min(src.width, src.height);
  const int w = std::max(side, static_cast<int>(std::lround(src.width * scale)));
  const int h = std::max(side, static_cast<int>(std::lround(src.height * scale)));
  RgbImage out(w, h);
  const double sx = static_cast<double>(src.width) / w;
  const double sy = static_cast<double>(src.height) / h;
  for (int y = 0; y < h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double ty = fy - y0;
    for (int x = 0; x < w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double tx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = src.at(x0, y0, c) * (1 - tx) + src.at(x1, y0, c) * tx;
        const double bot = src.at(x0, y1, c) * (1 - tx) + src.at(x1, y1, c) * tx;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(top * (1 - ty) + bot * ty));
      }
    }
  }
  return out;
}

/// Small images are brought up to the target size by the configured rule, then
/// an S x S window is cropped and normalized. `rng` is only consulted for
/// random crops.
inline ImageTensor preprocess_image(const RgbImage& image, const PreprocessPolicy& policy, Rng* rng = nullptr) {
  policy.validate();
  if (image.empty()) fail(ErrorKind::InvalidImage, "zero-area image");
  const int s = policy.target_size;

  const RgbImage* src = &image;
  RgbImage grown;
  if (image.width < s || image.height < s) {
    grown = policy.small_image_rule == SmallImageRule::TileThenCrop ? tile_to_cover(image, s)
                                                                    : resize_shorter_side(image, s);
    src = &grown;
  }

  int off_x = (src->width - s) / 2;
  int off_y = (src->height - s) / 2;
  if (policy.crop == CropMode::Random) {
    require(rng != nullptr, ErrorKind::InvalidInput, "random crop needs a generator");
    off_x = static_cast<int>(rng->below(static_cast<std::uint64_t>(src->width - s) + 1));
    off_y = static_cast<int>(rng->below(static_cast<std::uint64_t>(src->height - s) + 1));
  }

  ImageTensor out(s);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x)
        out.at(c, y, x) = (src->at(off_x + x, off_y + y, c) / 255.0 - policy.mean[c]) / policy.std[c];
  return out;
}

}  // namespace c2p::data
