#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "c2p/data/image.hpp"
#include "c2p/error.hpp"

namespace c2p::data {

namespace fs = std::filesystem;

enum class Layout { UniversalFakeDetect, GenImage, Flat };
enum class Split { Train, Val, Test };

NLOHMANN_JSON_SERIALIZE_ENUM(Layout, {{Layout::UniversalFakeDetect, "universal_fake_detect"},
                                      {Layout::GenImage, "genimage"},
                                      {Layout::Flat, "flat"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Split, {{Split::Train, "train"}, {Split::Val, "val"}, {Split::Test, "test"}})

inline Layout parse_layout(const std::string& s) {
  if (s == "universal_fake_detect" || s == "ufd") return Layout::UniversalFakeDetect;
  if (s == "genimage") return Layout::GenImage;
  if (s == "flat") return Layout::Flat;
  fail(ErrorKind::InvalidInput, "unknown layout '" + s + "'");
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  fail(ErrorKind::InvalidInput, "unknown split '" + s + "'");
}

inline std::string split_name(Split s) { return nlohmann::json(s).get<std::string>(); }

/// label: 0 = real, 1 = fake.
struct ImageRecord {
  std::string image_id;
  std::string path;
  int label = 0;
  std::string subset;
  std::optional<std::string> object_class;

  bool operator==(const ImageRecord&) const = default;
};

inline void to_json(nlohmann::json& j, const ImageRecord& r) {
  j = nlohmann::json{{"image_id", r.image_id}, {"path", r.path}, {"label", r.label}, {"subset", r.subset}};
  j["object_class"] = r.object_class ? nlohmann::json(*r.object_class) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, ImageRecord& r) {
  j.at("image_id").get_to(r.image_id);
  j.at("path").get_to(r.path);
  j.at("label").get_to(r.label);
  j.at("subset").get_to(r.subset);
  r.object_class.reset();
  if (auto it = j.find("object_class"); it != j.end() && !it->is_null()) r.object_class = it->get<std::string>();
  require(r.label == 0 || r.label == 1, ErrorKind::InvalidInput, "label must be 0 or 1 for " + r.image_id);
}

struct SkippedFile {
  std::string path;
  std::string reason;
};

struct DatasetManifest {
  std::vector<ImageRecord> records;
  Layout layout = Layout::Flat;
  Split split = Split::Test;
  std::optional<std::vector<std::string>> class_filter;
  std::vector<SkippedFile> skipped;

  std::set<std::string> subset_index() const {
    std::set<std::string> out;
    for (const auto& r : records) out.insert(r.subset);
    return out;
  }

  /// subset -> {n_real, n_fake}
  std::map<std::string, std::pair<std::size_t, std::size_t>> label_counts() const {
    std::map<std::string, std::pair<std::size_t, std::size_t>> out;
    for (const auto& r : records) (r.label == 0 ? out[r.subset].first : out[r.subset].second)++;
    return out;
  }

  void validate() const {
    std::set<std::string> ids;
    for (const auto& r : records) {
      require(r.label == 0 || r.label == 1, ErrorKind::InvalidInput, "bad label for " + r.image_id);
      require(ids.insert(r.image_id).second, ErrorKind::InvalidInput, "duplicate image_id " + r.image_id);
      if (class_filter) {
        require(r.object_class && std::find(class_filter->begin(), class_filter->end(), *r.object_class) !=
                                      class_filter->end(),
                ErrorKind::InvalidInput, r.image_id + " is outside the class filter");
      }
    }
  }
};

namespace detail {

inline std::optional<int> ufd_label(const std::string& dir) {
  if (dir == "0_real") return 0;
  if (dir == "1_fake") return 1;
  return std::nullopt;
}

inline std::optional<int> genimage_label(const std::string& dir) {
  if (dir == "nature") return 0;
  if (dir == "ai") return 1;
  return std::nullopt;
}

inline std::optional<int> flat_label(const std::string& dir) {
  if (dir == "real") return 0;
  if (dir == "fake") return 1;
  return std::nullopt;
}

/// Applies the directory convention to a root-relative path; nullopt when the
/// file is not part of the layout.
inline std::optional<ImageRecord> classify(const std::vector<std::string>& parts, Layout layout, Split split,
                                           const std::string& root_name) {
  ImageRecord r;
  switch (layout) {
    case Layout::UniversalFakeDetect:
      // <subset>/<class>/<0_real|1_fake>/... or <subset>/<0_real|1_fake>/...
      if (parts.size() >= 3 && ufd_label(parts[1])) {
        r.subset = parts[0];
        r.label = *ufd_label(parts[1]);
      } else if (parts.size() >= 4 && ufd_label(parts[2])) {
        r.subset = parts[0];
        r.object_class = parts[1];
        r.label = *ufd_label(parts[2]);
      } else {
        return std::nullopt;
      }
      return r;
    case Layout::GenImage:
      // <subset>/<split>/<ai|nature>/...
      if (parts.size() >= 4 && parts[1] == split_name(split) && genimage_label(parts[2])) {
        r.subset = parts[0];
        r.label = *genimage_label(parts[2]);
        return r;
      }
      return std::nullopt;
    case Layout::Flat:
      // <real|fake>/...
      if (parts.size() >= 2 && flat_label(parts[0])) {
        r.subset = root_name;
        r.label = *flat_label(parts[0]);
        return r;
      }
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace detail

/// Walks `root`, labels files by the layout's directory convention and keeps
/// those that decode. Records are ordered lexicographically by relative path.
/// Undecodable files land in `skipped` instead of aborting the scan.
inline DatasetManifest scan_dataset(const fs::path& root, Layout layout, Split split,
                                    std::optional<std::vector<std::string>> class_filter = std::nullopt) {
  if (!fs::exists(root) || !fs::is_directory(root)) fail(ErrorKind::NotFound, "dataset root " + root.string());

  DatasetManifest m;
  m.layout = layout;
  m.split = split;
  m.class_filter = std::move(class_filter);

  const fs::path abs_root = fs::absolute(root).lexically_normal();
  std::string root_name = abs_root.filename().string();
  if (root_name.empty()) root_name = abs_root.parent_path().filename().string();

  std::vector<fs::path> files;
  for (auto it = fs::recursive_directory_iterator(abs_root, fs::directory_options::follow_directory_symlink);
       it != fs::recursive_directory_iterator(); ++it) {
    if (it->is_regular_file() && is_image_path(it->path())) files.push_back(it->path());
  }
  std::vector<std::pair<std::string, fs::path>> keyed;
  keyed.reserve(files.size());
  for (auto& f : files) keyed.emplace_back(f.lexically_relative(abs_root).generic_string(), f);
  std::sort(keyed.begin(), keyed.end());

  for (const auto& [rel, full] : keyed) {
    std::vector<std::string> parts;
    for (const auto& p : fs::path(rel)) parts.push_back(p.string());
    auto rec = detail::classify(parts, layout, split, root_name);
    if (!rec) continue;
    if (m.class_filter) {
      const auto& cf = *m.class_filter;
      if (!rec->object_class || std::find(cf.begin(), cf.end(), *rec->object_class) == cf.end()) continue;
    }
    try {
      (void)load_image(full);
    } catch (const Error& e) {
      m.skipped.push_back({full.string(), e.what()});
      continue;
    }
    rec->image_id = rel;
    rec->path = full.string();
    m.records.push_back(std::move(*rec));
  }

  if (m.records.empty()) fail(ErrorKind::EmptyDataset, "no matching images under " + root.string());
  return m;
}

inline void write_manifest_jsonl(const DatasetManifest& m, const fs::path& out) {
  std::ofstream f(out, std::ios::binary);
  if (!f) fail(ErrorKind::IoError, "cannot write " + out.string());
  for (const auto& r : m.records) f << nlohmann::json(r).dump() << '\n';
  if (!f) fail(ErrorKind::IoError, "short write to " + out.string());
}

inline DatasetManifest read_manifest_jsonl(const fs::path& in) {
  std::ifstream f(in);
  if (!f) fail(ErrorKind::NotFound, "manifest " + in.string());
  DatasetManifest m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      m.records.push_back(nlohmann::json::parse(line).get<ImageRecord>());
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::InvalidInput, in.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  m.validate();
  return m;
}

}  // namespace c2p::data
