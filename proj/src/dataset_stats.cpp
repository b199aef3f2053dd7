#include "malprotect/dataset_stats.hpp"

#include <random>

#include "malprotect/dataset.hpp"
#include "malprotect/errors.hpp"

namespace malprotect {

DatasetStats compute_dataset_stats(std::span<const FeatureVector> training, std::size_t pair_budget,
                                   std::uint64_t seed) {
  const std::size_t n = training.size();
  if (n < 2) throw CalibrationError("dataset statistics need at least two training vectors");
  if (pair_budget == 0) throw CalibrationError("pair budget must be at least 1");

  DatasetStats stats;
  stats.pair_budget = pair_budget;

  long double features = 0;
  for (const auto& v : training) features += static_cast<long double>(v.enabled_count());
  stats.avg_features = static_cast<double>(features / static_cast<long double>(n));

  const std::size_t all_pairs = n * (n - 1) / 2;
  long double dist = 0, shared = 0;
  auto accumulate = [&](std::size_t i, std::size_t j) {
    const auto s = shared_enabled(training[i], training[j]);
    shared += static_cast<long double>(s);
    dist += static_cast<long double>(training[i].enabled_count() + training[j].enabled_count() - 2 * s);
  };

  if (all_pairs <= pair_budget) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) accumulate(i, j);
    stats.pairs_used = all_pairs;
  } else {
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    std::uniform_int_distribution<std::size_t> other(0, n - 2);
    for (std::size_t k = 0; k < pair_budget; ++k) {
      const std::size_t i = first(rng);
      std::size_t j = other(rng);
      if (j >= i) ++j;
      accumulate(i, j);
    }
    stats.pairs_used = pair_budget;
  }
  stats.avg_dist = static_cast<double>(dist / static_cast<long double>(stats.pairs_used));
  stats.avg_shared = static_cast<double>(shared / static_cast<long double>(stats.pairs_used));
  return stats;
}

}  // namespace malprotect
