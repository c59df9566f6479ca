#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "c2p/error.hpp"

#ifdef C2P_WITH_OPENCV
#include <opencv2/imgcodecs.hpp>
#endif

namespace c2p::data {

/// Interleaved 8-bit RGB raster, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  bool empty() const { return width <= 0 || height <= 0; }
};

namespace detail {

inline bool has_ext(const std::filesystem::path& p, std::initializer_list<const char*> exts) {
  std::string e = p.extension().string();
  for (auto& ch : e) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  for (const char* x : exts)
    if (e == x) return true;
  return false;
}

class NetpbmReader {
 public:
  explicit NetpbmReader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}

  int next_int() {
    skip_space_and_comments();
    int value = 0;
    bool any = false;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_++] - '0');
      any = true;
      if (value > (1 << 24)) fail(ErrorKind::InvalidImage, "netpbm header value out of range");
    }
    if (!any) fail(ErrorKind::InvalidImage, "malformed netpbm header");
    return value;
  }

  void skip_single_whitespace() {
    if (pos_ < bytes_.size() && std::isspace(bytes_[pos_])) ++pos_;
  }

  std::uint8_t next_byte() {
    if (pos_ >= bytes_.size()) fail(ErrorKind::InvalidImage, "truncated netpbm raster");
    return bytes_[pos_++];
  }

  std::string magic() {
    if (bytes_.size() < 2) fail(ErrorKind::InvalidImage, "file too short");
    pos_ = 2;
    return std::string(bytes_.begin(), bytes_.begin() + 2);
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline RgbImage decode_netpbm(std::vector<std::uint8_t> bytes) {
  NetpbmReader in(std::move(bytes));
  const std::string magic = in.magic();
  const bool color = magic == "P3" || magic == "P6";
  const bool ascii = magic == "P2" || magic == "P3";
  if (magic != "P2" && magic != "P3" && magic != "P5" && magic != "P6")
    fail(ErrorKind::InvalidImage, "unsupported netpbm magic '" + magic + "'");
  const int w = in.next_int();
  const int h = in.next_int();
  const int maxval = in.next_int();
  if (w <= 0 || h <= 0) fail(ErrorKind::InvalidImage, "zero-area image");
  if (maxval <= 0 || maxval > 255) fail(ErrorKind::InvalidImage, "only 8-bit netpbm is supported");
  if (!ascii) in.skip_single_whitespace();

  RgbImage img(w, h);
  auto sample = [&]() -> std::uint8_t {
    const int v = ascii ? in.next_int() : in.next_byte();
    return static_cast<std::uint8_t>(v * 255 / maxval);
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (color) {
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = sample();
      } else {
        const std::uint8_t g = sample();
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = g;
      }
    }
  }
  return img;
}

}  // namespace detail

/// File extensions the scanner treats as images.
inline bool is_image_path(const std::filesystem::path& p) {
  return detail::has_ext(p, {".ppm", ".pgm", ".pnm", ".png", ".jpg", ".jpeg", ".bmp", ".webp", ".tif", ".tiff"});
}

/// Netpbm is always available; other formats need the OpenCV build option.
inline RgbImage load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::NotFound, path.string());
  if (detail::has_ext(path, {".ppm", ".pgm", ".pnm"})) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::IoError, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return detail::decode_netpbm(std::move(bytes));
  }
#ifdef C2P_WITH_OPENCV
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) fail(ErrorKind::InvalidImage, "cannot decode " + path.string());
  RgbImage img(bgr.cols, bgr.rows);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = row[x][2 - c];
  }
  return img;
#else
  fail(ErrorKind::Unsupported, "decoding " + path.extension().string() + " requires building with OpenCV");
#endif
}

/// Binary P6.
inline void save_ppm(const RgbImage& img, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::IoError, "cannot write " + path.string());
  f << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!f) fail(ErrorKind::IoError, "short write to " + path.string());
}

}  // namespace c2p::data
