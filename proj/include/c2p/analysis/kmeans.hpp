#pragma once

#include <limits>
#include <vector>

#include "c2p/encoder/tape.hpp"
#include "c2p/error.hpp"
#include "c2p/rng.hpp"

namespace c2p::analysis {

struct KMeansResult {
  nn::Matrix centers;                    ///< k x D
  std::vector<int> assignments;          ///< one per row of the input
  std::vector<double> objective;         ///< sum of squared distances after each assignment pass
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline std::pair<int, double> nearest(const nn::Matrix& centers, const nn::Matrix& x, Eigen::Index i) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    const double d = (x.row(i) - centers.row(c)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return {best, best_d};
}

}  // namespace detail

/// Lloyd iterations from a seeded k-means++ start. Stops when no assignment
/// changes or after `max_iterations`. A cluster that empties keeps its
/// previous center.
inline KMeansResult kmeans(const nn::Matrix& x, int k, std::uint64_t seed, int max_iterations = 300) {
  require(k >= 1, ErrorKind::InvalidInput, "k must be >= 1");
  require(x.rows() >= k, ErrorKind::InvalidInput, "k-means needs at least k points");
  const Eigen::Index n = x.rows();
  Rng rng(seed);

  KMeansResult r;
  r.centers.resize(k, x.cols());
  r.centers.row(0) = x.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (x.row(i) - r.centers.row(c - 1)).squaredNorm());
      total += d2[i];
    }
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        pick = i;  // last positive-weight point covers rounding at the top end
        acc += d2[i];
        if (target < acc) break;
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    r.centers.row(c) = x.row(pick);
  }

  r.assignments.assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    double obj = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto [c, d] = detail::nearest(r.centers, x, i);
      obj += d;
      if (c != r.assignments[i]) {
        r.assignments[i] = c;
        changed = true;
      }
    }
    r.objective.push_back(obj);
    r.iterations = it + 1;
    if (!changed) {
      r.converged = true;
      break;
    }
    nn::Matrix sums = nn::Matrix::Zero(k, x.cols());
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(r.assignments[i]) += x.row(i);
      ++counts[r.assignments[i]];
    }
    for (int c = 0; c < k; ++c)
      if (counts[c] > 0) r.centers.row(c) = sums.row(c) / static_cast<double>(counts[c]);
  }
  return r;
}

}  // namespace c2p::analysis
