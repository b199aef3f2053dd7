#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "malprotect/feature_vector.hpp"

namespace malprotect {

using Rng = std::mt19937_64;

enum class Label : std::uint8_t { benign = 0, malware = 1 };
enum class Split : std::uint8_t { train, validation, test };

constexpr int to_int(Label l) noexcept { return static_cast<int>(l); }
Label label_from_int(int value);
std::string_view to_string(Split s) noexcept;
Split split_from_string(std::string_view s);

struct LabeledSample {
  FeatureVector vector;
  Label label = Label::benign;
  Split split = Split::train;
};

struct SplitRatio {
  double train = 64;
  double validation = 16;
  double test = 20;
};

struct Dataset {
  std::size_t dim = 0;
  std::vector<LabeledSample> samples;

  std::vector<FeatureVector> vectors(Split split) const;
  std::vector<FeatureVector> vectors(Split split, Label label) const;
  std::vector<LabeledSample> subset(Split split) const;
  std::size_t count(Split split) const;
  std::size_t count(Split split, Label label) const;
};

/// Stratified per class: each class is shuffled and cut by `ratio`.
void assign_splits(Dataset& dataset, const SplitRatio& ratio, std::uint64_t seed);

}  // namespace malprotect
