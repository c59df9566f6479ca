#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "c2p/encoder/tape.hpp"
#include "c2p/error.hpp"
#include "c2p/rng.hpp"

namespace c2p::nn {

/// Ordered collection of named parameters. Iteration order is by name, which
/// makes checksums and archives independent of construction order.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Matrix value, bool trainable = false) {
    auto [it, inserted] = params_.try_emplace(name);
    require(inserted, ErrorKind::InvalidInput, "duplicate parameter " + name);
    it->second.name = name;
    it->second.value = std::move(value);
    it->second.trainable = trainable;
    return it->second;
  }

  Parameter& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) fail(ErrorKind::NotFound, "parameter " + name);
    return it->second;
  }
  const Parameter& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) fail(ErrorKind::NotFound, "parameter " + name);
    return it->second;
  }
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

  /// Number of scalar entries.
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  void zero_grad() {
    for (auto& [_, p] : params_) p.zero_grad();
  }

  void set_trainable(bool trainable) {
    for (auto& [_, p] : params_) p.trainable = trainable;
  }

 private:
  std::map<std::string, Parameter> params_;
};

/// FNV-1a over names and raw value bytes of the selected parameters.
inline std::uint64_t checksum(const ParameterStore& store,
                              const std::function<bool(const std::string&)>& select = nullptr) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const auto& [name, p] : store) {
    if (select && !select(name)) continue;
    h = fnv1a64(name, h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(p.value.data()),
                                 static_cast<std::size_t>(p.value.size()) * sizeof(double)),
                h);
  }
  return h;
}

inline Matrix random_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, stddev);
  return m;
}

inline Matrix random_uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols, double bound) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

// ---- tensor archive ---------------------------------------------------------
//
// Layout (little-endian):
//   "C2PT" | u32 version | u64 count |
//   count x ( u32 name_len | name | u64 rows | u64 cols | rows*cols f64 row-major )

inline constexpr std::uint32_t kArchiveVersion = 1;

namespace detail {
static_assert(std::endian::native == std::endian::little, "tensor archives assume a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) fail(ErrorKind::IoError, "truncated tensor archive");
  return v;
}
}  // namespace detail

inline void save_archive(const std::map<std::string, Matrix>& tensors, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::IoError, "cannot write " + path.string());
  f.write("C2PT", 4);
  detail::put<std::uint32_t>(f, kArchiveVersion);
  detail::put<std::uint64_t>(f, tensors.size());
  for (const auto& [name, m] : tensors) {
    detail::put<std::uint32_t>(f, static_cast<std::uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put<std::uint64_t>(f, static_cast<std::uint64_t>(m.rows()));
    detail::put<std::uint64_t>(f, static_cast<std::uint64_t>(m.cols()));
    f.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  if (!f) fail(ErrorKind::IoError, "short write to " + path.string());
}

inline std::map<std::string, Matrix> load_archive(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::NotFound, "tensor archive " + path.string());
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "C2PT", 4) != 0) fail(ErrorKind::IoError, path.string() + " is not a tensor archive");
  const auto version = detail::get<std::uint32_t>(f);
  if (version != kArchiveVersion)
    fail(ErrorKind::VersionError, path.string() + " has archive version " + std::to_string(version) +
                                      ", expected " + std::to_string(kArchiveVersion) +
                                      "; re-export it with a matching c2p release");
  const auto count = detail::get<std::uint64_t>(f);
  std::map<std::string, Matrix> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = detail::get<std::uint32_t>(f);
    std::string name(len, '\0');
    f.read(name.data(), len);
    const auto rows = detail::get<std::uint64_t>(f);
    const auto cols = detail::get<std::uint64_t>(f);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    f.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!f) fail(ErrorKind::IoError, "truncated tensor archive " + path.string());
    out.emplace(std::move(name), std::move(m));
  }
  return out;
}

inline std::map<std::string, Matrix> to_tensor_map(const ParameterStore& store) {
  std::map<std::string, Matrix> out;
  for (const auto& [name, p] : store) out.emplace(name, p.value);
  return out;
}

/// Overwrites every parameter in `store` from `tensors`; names and shapes must
/// match exactly.
inline void assign_from(ParameterStore& store, const std::map<std::string, Matrix>& tensors) {
  require(tensors.size() == store.size(), ErrorKind::InvalidInput,
          "archive holds " + std::to_string(tensors.size()) + " tensors, model expects " +
              std::to_string(store.size()));
  for (auto& [name, p] : store) {
    auto it = tensors.find(name);
    require(it != tensors.end(), ErrorKind::InvalidInput, "archive is missing " + name);
    require(it->second.rows() == p.value.rows() && it->second.cols() == p.value.cols(), ErrorKind::InvalidInput,
            "shape mismatch for " + name);
    p.value = it->second;
  }
}

}  // namespace c2p::nn

namespace c2p::nn {

/// Copies tape gradients into `grad` of every trainable parameter in `store`.
inline void collect_grads(const Tape& tape, ParameterStore& store) {
  for (auto& [_, p] : store)
    if (p.trainable) p.grad = tape.grad_of(p);
}

}  // namespace c2p::nn
