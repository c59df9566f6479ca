#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "c2p/caption/provider.hpp"
#include "c2p/data/manifest.hpp"
#include "c2p/data/preprocess.hpp"
#include "c2p/error.hpp"

namespace c2p::caption {

namespace fs = std::filesystem;

struct CaptionRecord {
  std::string image_id;
  std::string caption;
  int label = 0;
  std::string subset;

  /// Provider returned nothing usable.
  bool degenerate() const { return caption.empty(); }
  bool operator==(const CaptionRecord&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CaptionRecord, image_id, caption, label, subset)

struct FlaggedImage {
  std::string image_id;
  std::string reason;
};

/// Collapses whitespace runs and trims the ends.
inline std::string clean_caption(const std::string& raw) {
  std::string out;
  bool space = false;
  for (char ch : raw) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      space = !out.empty();
    } else {
      if (space) out.push_back(' ');
      space = false;
      out.push_back(ch);
    }
  }
  return out;
}

/// Captions keyed by image id, remembering insertion order.
class CaptionCache {
 public:
  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  const CaptionRecord& at(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) fail(ErrorKind::NotFound, "no caption for " + id);
    return records_[it->second];
  }
  const CaptionRecord* find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &records_[it->second];
  }
  void insert(CaptionRecord r) {
    if (contains(r.image_id)) return;
    index_.emplace(r.image_id, records_.size());
    records_.push_back(std::move(r));
  }
  const std::vector<CaptionRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  std::vector<FlaggedImage> flagged;

  static CaptionCache load(const fs::path& path) {
    CaptionCache cache;
    if (!fs::exists(path)) return cache;
    std::ifstream f(path);
    if (!f) fail(ErrorKind::IoError, "cannot read " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        cache.insert(nlohmann::json::parse(line).get<CaptionRecord>());
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::InvalidInput, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    return cache;
  }

  void save(const fs::path& path) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorKind::IoError, "cannot write " + path.string());
    for (const auto& r : records_) f << nlohmann::json(r).dump() << '\n';
    if (!f) fail(ErrorKind::IoError, "short write to " + path.string());
  }

 private:
  std::vector<CaptionRecord> records_;
  std::map<std::string, std::size_t> index_;
};

/// Appends JSONL lines and flushes after each; any write failure is fatal.
class CacheWriter {
 public:
  explicit CacheWriter(const fs::path& path) : path_(path), out_(path, std::ios::binary | std::ios::app) {
    if (!out_) fail(ErrorKind::IoError, "cannot open caption cache " + path.string());
  }
  void append(const CaptionRecord& r) {
    out_ << nlohmann::json(r).dump() << '\n';
    out_.flush();
    if (!out_) fail(ErrorKind::IoError, "write to caption cache " + path_.string() + " failed");
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

/// Captions every record of `manifest` not already in `cache`, in manifest
/// order. Images the provider (or decoder) fails on are flagged and skipped.
/// When `writer` is given each new record is persisted as it is produced.
inline void generate_captions(const data::DatasetManifest& manifest, CaptionProvider& provider,
                              const data::PreprocessPolicy& policy, CaptionCache& cache,
                              CacheWriter* writer = nullptr) {
  data::PreprocessPolicy eval_policy = policy;
  eval_policy.crop = data::CropMode::Center;
  cache.flagged.clear();
  for (const auto& rec : manifest.records) {
    if (cache.contains(rec.image_id)) continue;
    std::string text;
    try {
      const auto tensor = data::preprocess_image(data::load_image(rec.path), eval_policy);
      text = clean_caption(provider.caption(tensor, rec));
    } catch (const std::exception& e) {
      cache.flagged.push_back({rec.image_id, e.what()});
      continue;
    }
    CaptionRecord out{rec.image_id, std::move(text), rec.label, rec.subset};
    if (writer != nullptr) writer->append(out);
    cache.insert(std::move(out));
  }
}

}  // namespace c2p::caption
