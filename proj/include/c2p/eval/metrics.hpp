#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "c2p/error.hpp"

namespace c2p::eval {

/// Mean, over positives ranked by descending score, of the precision at each
/// positive's rank. Equal scores keep their input order.
inline double average_precision(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), ErrorKind::InvalidInput, "scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]] == 1) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0) fail(ErrorKind::Undefined, "average precision needs at least one positive");
  return sum / static_cast<double>(hits);
}

struct AccuracyResult {
  double raw = 0.0;       ///< fraction of correct decisions
  double balanced = 0.0;  ///< mean of real-class and fake-class accuracy
  std::optional<double> real;
  std::optional<double> fake;
};

/// Decision is probability >= threshold -> fake.
inline AccuracyResult accuracy(std::span<const double> probabilities, std::span<const int> labels,
                               double threshold = 0.5) {
  require(probabilities.size() == labels.size(), ErrorKind::InvalidInput, "probabilities and labels differ");
  if (probabilities.empty()) fail(ErrorKind::Undefined, "accuracy of an empty set");
  std::size_t correct = 0, n_real = 0, n_fake = 0, ok_real = 0, ok_fake = 0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const int pred = probabilities[i] >= threshold ? 1 : 0;
    const bool ok = pred == labels[i];
    correct += ok;
    if (labels[i] == 0) {
      ++n_real;
      ok_real += ok;
    } else {
      ++n_fake;
      ok_fake += ok;
    }
  }
  AccuracyResult r;
  r.raw = static_cast<double>(correct) / static_cast<double>(probabilities.size());
  if (n_real) r.real = static_cast<double>(ok_real) / static_cast<double>(n_real);
  if (n_fake) r.fake = static_cast<double>(ok_fake) / static_cast<double>(n_fake);
  if (r.real && r.fake)
    r.balanced = 0.5 * (*r.real + *r.fake);
  else
    r.balanced = r.real ? *r.real : *r.fake;
  return r;
}

struct SubsetMetrics {
  std::optional<double> ap;  ///< absent when the subset has no fake images
  double acc = 0.0;
  double balanced_acc = 0.0;
  std::optional<double> real_acc;
  std::optional<double> fake_acc;
  std::size_t n_real = 0;
  std::size_t n_fake = 0;
};

/// One benchmark row: per-subset AP/Acc and their unweighted means.
struct MetricsReport {
  std::map<std::string, SubsetMetrics> per_subset;
  double map_mean = std::numeric_limits<double>::quiet_NaN();
  double macc_mean = std::numeric_limits<double>::quiet_NaN();
  std::size_t excluded = 0;  ///< flagged images left out of every metric
};

namespace detail {
template <typename T>
nlohmann::json opt(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}
inline nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
}  // namespace detail

inline void to_json(nlohmann::json& j, const SubsetMetrics& m) {
  j = {{"ap", detail::opt(m.ap)},         {"acc", m.acc},
       {"balanced_acc", m.balanced_acc},  {"real_acc", detail::opt(m.real_acc)},
       {"fake_acc", detail::opt(m.fake_acc)}, {"n_real", m.n_real},
       {"n_fake", m.n_fake}};
}

inline void to_json(nlohmann::json& j, const MetricsReport& r) {
  j = {{"per_subset", r.per_subset},
       {"mAP", detail::num(r.map_mean)},
       {"mAcc", detail::num(r.macc_mean)},
       {"excluded", r.excluded}};
}

/// Scores and labels of one subset; probabilities drive both AP and Acc.
struct SubsetScores {
  std::vector<double> probabilities;
  std::vector<int> labels;
};

inline MetricsReport build_report(const std::map<std::string, SubsetScores>& subsets, double threshold = 0.5) {
  MetricsReport report;
  double ap_sum = 0.0, acc_sum = 0.0;
  std::size_t ap_n = 0, acc_n = 0;
  for (const auto& [name, s] : subsets) {
    if (s.labels.empty()) continue;
    SubsetMetrics m;
    m.n_fake = static_cast<std::size_t>(std::count(s.labels.begin(), s.labels.end(), 1));
    m.n_real = s.labels.size() - m.n_fake;
    if (m.n_fake > 0) {
      m.ap = average_precision(s.probabilities, s.labels);
      ap_sum += *m.ap;
      ++ap_n;
    }
    const auto acc = accuracy(s.probabilities, s.labels, threshold);
    m.acc = acc.raw;
    m.balanced_acc = acc.balanced;
    m.real_acc = acc.real;
    m.fake_acc = acc.fake;
    acc_sum += m.acc;
    ++acc_n;
    report.per_subset.emplace(name, m);
  }
  if (ap_n) report.map_mean = ap_sum / static_cast<double>(ap_n);
  if (acc_n) report.macc_mean = acc_sum / static_cast<double>(acc_n);
  return report;
}

}  // namespace c2p::eval
