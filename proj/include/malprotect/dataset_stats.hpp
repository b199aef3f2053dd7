#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "malprotect/feature_vector.hpp"

namespace malprotect {

inline constexpr std::size_t kDefaultPairBudget = 100'000;

/// Training-data averages the indicators normalise against.
struct DatasetStats {
  double avg_dist = 0;      ///< mean pairwise L0 distance
  double avg_shared = 0;    ///< mean pairwise shared-enabled count
  double avg_features = 0;  ///< mean enabled count
  std::size_t pair_budget = kDefaultPairBudget;
  std::size_t pairs_used = 0;
};

/// Pairwise averages use every unordered pair when there are at most
/// `pair_budget` of them; otherwise `pair_budget` pairs drawn uniformly with
/// the given seed. The enabled-count average is always exact.
DatasetStats compute_dataset_stats(std::span<const FeatureVector> training, std::size_t pair_budget,
                                   std::uint64_t seed);

}  // namespace malprotect
