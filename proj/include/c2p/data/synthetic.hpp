#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>

#include "c2p/data/image.hpp"
#include "c2p/rng.hpp"

namespace c2p::data {

/// Procedural two-class image set. Real images are smooth gradients with mild
/// noise; fake images are drawn from the same family and then overlaid with a
/// period-2 checkerboard, the upsampling trace GAN generators tend to leave.
struct SyntheticSpec {
  int size = 32;
  int n_real = 64;
  int n_fake = 64;
  double artifact_amplitude = 40.0;
  std::uint64_t seed = 123;
};

inline RgbImage synthetic_image(Rng& rng, int size, bool fake, double artifact_amplitude) {
  RgbImage img(size, size);
  double base[3], gx[3], gy[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(60.0, 190.0);
    gx[c] = rng.uniform(-40.0, 40.0);
    gy[c] = rng.uniform(-40.0, 40.0);
  }
  const double freq = rng.uniform(0.5, 1.5);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double fx = static_cast<double>(x) / size - 0.5;
      const double fy = static_cast<double>(y) / size - 0.5;
      const double wave = 15.0 * std::sin(2.0 * std::numbers::pi * freq * (fx + fy) + phase);
      const double check = fake ? (((x + y) & 1) ? artifact_amplitude : -artifact_amplitude) : 0.0;
      for (int c = 0; c < 3; ++c) {
        const double v = base[c] + gx[c] * fx + gy[c] * fy + wave + check + rng.normal(0.0, 4.0);
        img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  return img;
}

/// Writes `<root>/real/*.ppm` and `<root>/fake/*.ppm` (the flat layout).
inline void write_synthetic_dataset(const std::filesystem::path& root, const SyntheticSpec& spec) {
  namespace fs = std::filesystem;
  Rng rng(spec.seed);
  for (const auto& [dir, count, fake] : {std::tuple{"real", spec.n_real, false}, std::tuple{"fake", spec.n_fake, true}}) {
    fs::create_directories(root / dir);
    for (int i = 0; i < count; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "%05d.ppm", i);
      save_ppm(synthetic_image(rng, spec.size, fake, spec.artifact_amplitude), root / dir / name);
    }
  }
}

}  // namespace c2p::data
