#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "c2p/encoder/text_tower.hpp"
#include "c2p/error.hpp"

namespace c2p::analysis {

inline constexpr const char* kStopWordsVersion = "c2p-en-1";

/// Fixed English stop-word list. Changing it changes every word table, so the
/// version string above is written next to each table.
inline const std::set<std::string>& default_stop_words() {
  static const std::set<std::string> words{
      "a",      "about",  "above", "after",  "again", "against", "all",   "am",    "an",    "and",   "any",
      "are",    "as",     "at",    "be",     "been",  "before",  "being", "below", "between", "both", "but",
      "by",     "can",    "could", "did",    "do",    "does",    "doing", "down",  "during", "each", "few",
      "for",    "from",   "further", "had",  "has",   "have",    "having", "he",   "her",   "here",  "hers",
      "him",    "his",    "how",   "i",      "if",    "in",      "into",  "is",    "it",    "its",   "itself",
      "just",   "me",     "more",  "most",   "my",    "no",      "nor",   "not",   "now",   "of",    "off",
      "on",     "once",   "only",  "or",     "other", "our",     "out",   "over",  "own",   "same",  "she",
      "should", "so",     "some",  "such",   "than",  "that",    "the",   "their", "them",  "then",  "there",
      "these",  "they",   "this",  "those",  "through", "to",    "too",   "under", "until", "up",    "very",
      "was",    "we",     "were",  "what",   "when",  "where",   "which", "while", "who",   "whom",  "why",
      "will",   "with",   "would", "you",    "your",  "yours",   "lot",   "lots"};
  return words;
}

struct WordFrequencyTable {
  std::vector<std::pair<std::string, std::size_t>> entries;  ///< count desc, then word asc
  std::size_t corpus_size = 0;   ///< number of texts
  std::size_t total_tokens = 0;  ///< non-stop-word tokens before truncation to top_k
  std::size_t top_k = 15;
};

inline void to_json(nlohmann::json& j, const WordFrequencyTable& t) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [w, c] : t.entries) entries.push_back({{"word", w}, {"count", c}});
  j = {{"entries", entries},
       {"corpus_size", t.corpus_size},
       {"total_tokens", t.total_tokens},
       {"top_k", t.top_k},
       {"stop_words", kStopWordsVersion}};
}

/// Lowercase alphanumeric tokens minus stop words, counted and ranked.
inline WordFrequencyTable word_frequency(const std::vector<std::string>& texts, std::size_t top_k,
                                         const std::set<std::string>& stop_words) {
  require(top_k >= 1, ErrorKind::InvalidInput, "top_k must be >= 1");
  std::map<std::string, std::size_t> counts;
  WordFrequencyTable table;
  table.corpus_size = texts.size();
  table.top_k = top_k;
  for (const auto& text : texts)
    for (auto& tok : nn::tokenize(text)) {
      if (stop_words.count(tok)) continue;
      ++counts[tok];
      ++table.total_tokens;
    }
  table.entries.assign(counts.begin(), counts.end());
  std::stable_sort(table.entries.begin(), table.entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (table.entries.size() > top_k) table.entries.resize(top_k);
  return table;
}

inline WordFrequencyTable word_frequency(const std::vector<std::string>& texts, std::size_t top_k = 15) {
  return word_frequency(texts, top_k, default_stop_words());
}

}  // namespace c2p::analysis
