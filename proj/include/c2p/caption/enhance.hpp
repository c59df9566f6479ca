#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "c2p/caption/cache.hpp"
#include "c2p/error.hpp"

namespace c2p::caption {

/// Category common prompts: one fixed word (or phrase) per class.
struct PromptPair {
  std::string p_real = "Camera";
  std::string p_fake = "Deepfake";

  void validate() const {
    require(!p_real.empty() && !p_fake.empty(), ErrorKind::InvalidInput, "prompts must be non-empty");
    require(p_real != p_fake, ErrorKind::InvalidInput, "real and fake prompts must differ");
  }

  const std::string& for_label(int label) const { return label == 0 ? p_real : p_fake; }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PromptPair, p_real, p_fake)

inline constexpr const char* kPromptSeparator = ", ";

struct EnhancedCaption {
  std::string image_id;
  std::string text;
  int label = 0;
};

/// Prefixes the class prompt: "<prompt>, <caption>", or just "<prompt>" for an
/// empty caption.
inline EnhancedCaption enhance_caption(const std::string& caption, int label, const PromptPair& pair,
                                       std::string image_id = {}) {
  pair.validate();
  require(label == 0 || label == 1, ErrorKind::InvalidInput, "label must be 0 or 1");
  const std::string body = clean_caption(caption);
  const std::string& prompt = pair.for_label(label);
  std::string text = body.empty() ? prompt : prompt + kPromptSeparator + body;
  return EnhancedCaption{std::move(image_id), std::move(text), label};
}

inline EnhancedCaption enhance_caption(const CaptionRecord& record, const PromptPair& pair) {
  return enhance_caption(record.caption, record.label, pair, record.image_id);
}

inline std::vector<EnhancedCaption> enhance_all(const CaptionCache& cache, const PromptPair& pair) {
  std::vector<EnhancedCaption> out;
  out.reserve(cache.size());
  for (const auto& r : cache.records()) out.push_back(enhance_caption(r, pair));
  return out;
}

/// True when every label-0 caption starts with p_real and every label-1
/// caption starts with p_fake, each followed by the separator or nothing.
inline bool prompts_consistent(const std::vector<EnhancedCaption>& captions, const PromptPair& pair) {
  for (const auto& c : captions) {
    const std::string& prompt = pair.for_label(c.label);
    if (c.text.compare(0, prompt.size(), prompt) != 0) return false;
    const std::string rest = c.text.substr(prompt.size());
    if (!rest.empty() && rest.compare(0, 2, kPromptSeparator) != 0) return false;
  }
  return true;
}

}  // namespace c2p::caption
