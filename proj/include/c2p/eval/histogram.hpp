#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "c2p/error.hpp"
#include "c2p/eval/predict.hpp"

namespace c2p::eval {

struct LogitHistogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> edges;         ///< bins + 1 entries
  std::vector<std::size_t> real_counts;
  std::vector<std::size_t> fake_counts;
  std::vector<double> real_density;  ///< fraction of real logits per bin
  std::vector<double> fake_density;
  std::optional<double> overlap;     ///< sum of per-bin min(real, fake); absent if a class is missing
};

inline void to_json(nlohmann::json& j, const LogitHistogram& h) {
  j = {{"lo", h.lo},
       {"hi", h.hi},
       {"edges", h.edges},
       {"real_counts", h.real_counts},
       {"fake_counts", h.fake_counts},
       {"real_density", h.real_density},
       {"fake_density", h.fake_density},
       {"overlap", h.overlap ? nlohmann::json(*h.overlap) : nlohmann::json(nullptr)}};
}

/// Uniform bins over the pooled [min, max] logit range. A zero-width range
/// collapses to one bin holding everything.
inline LogitHistogram logit_histogram(const std::vector<double>& real, const std::vector<double>& fake,
                                      int bins = 50) {
  require(bins >= 1, ErrorKind::InvalidInput, "need at least one bin");
  require(!real.empty() || !fake.empty(), ErrorKind::InvalidInput, "no logits to bin");
  LogitHistogram h;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto* xs : {&real, &fake})
    for (double x : *xs) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  h.lo = lo;
  h.hi = hi;
  const int nb = hi > lo ? bins : 1;
  const double width = nb > 1 ? (hi - lo) / nb : 0.0;
  for (int b = 0; b <= nb; ++b) h.edges.push_back(b == nb ? hi : lo + b * width);
  auto bin_of = [&](double x) {
    if (nb == 1) return 0;
    return std::min(nb - 1, static_cast<int>((x - lo) / width));
  };
  h.real_counts.assign(nb, 0);
  h.fake_counts.assign(nb, 0);
  for (double x : real) ++h.real_counts[bin_of(x)];
  for (double x : fake) ++h.fake_counts[bin_of(x)];
  auto density = [](const std::vector<std::size_t>& c, std::size_t n) {
    std::vector<double> d(c.size(), 0.0);
    if (n)
      for (std::size_t i = 0; i < c.size(); ++i) d[i] = static_cast<double>(c[i]) / static_cast<double>(n);
    return d;
  };
  h.real_density = density(h.real_counts, real.size());
  h.fake_density = density(h.fake_counts, fake.size());
  if (!real.empty() && !fake.empty()) {
    double ov = 0.0;
    for (int b = 0; b < nb; ++b) ov += std::min(h.real_density[b], h.fake_density[b]);
    h.overlap = ov;
  }
  return h;
}

/// Per-subset real/fake logit histograms.
inline std::map<std::string, LogitHistogram> export_logit_distribution(const std::vector<DetectionResult>& results,
                                                                       int bins = 50) {
  require(!results.empty(), ErrorKind::InvalidInput, "no detection results");
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> split;
  for (const auto& r : results) (r.label == 0 ? split[r.subset].first : split[r.subset].second).push_back(r.logit);
  std::map<std::string, LogitHistogram> out;
  for (const auto& [subset, pair] : split) out.emplace(subset, logit_histogram(pair.first, pair.second, bins));
  return out;
}

}  // namespace c2p::eval
