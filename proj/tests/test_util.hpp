#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "c2p/data/image.hpp"
#include "c2p/rng.hpp"

namespace c2p::test {

namespace fs = std::filesystem;

/// Fresh directory per test under the build tree.
inline fs::path scratch_dir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  fs::path dir = fs::path(C2P_TEST_TMP) / (std::string(info->test_suite_name()) + "." + info->name());
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

inline data::RgbImage noise_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  data::RgbImage img(w, h);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

inline void write_noise(const fs::path& path, int w, int h, std::uint64_t seed) {
  fs::create_directories(path.parent_path());
  data::save_ppm(noise_image(w, h, seed), path);
}

inline void write_bytes(const fs::path& path, const std::string& bytes) {
  fs::create_directories(path.parent_path());
  std::ofstream(path, std::ios::binary) << bytes;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace c2p::test
