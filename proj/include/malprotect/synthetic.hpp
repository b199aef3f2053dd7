#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>

#include "malprotect/dataset.hpp"
#include "malprotect/families.hpp"

namespace malprotect {

struct SyntheticConfig {
  std::size_t dim = 512;
  std::size_t n_per_class = 2000;
  double benign_prototype_density = 0.3;
  double malware_prototype_density = 0.1;
  double flip_noise = 0.05;
  std::size_t n_families = 8;
  /// Models a dataset where only feature addition preserves functionality.
  bool add_only = false;
  SplitRatio split{};

  void validate() const;
};

/// One Bernoulli prototype per class; every sample is its class prototype with
/// each bit flipped independently with probability `flip_noise`. Classes are
/// balanced and split-tagged; the same seed gives a bit-identical dataset.
std::pair<Dataset, FeatureFamilyTable> generate_synthetic_dataset(const SyntheticConfig& config,
                                                                  std::uint64_t seed);

}  // namespace malprotect
