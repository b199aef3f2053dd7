#include "malprotect/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "malprotect/errors.hpp"

namespace malprotect {

Label label_from_int(int value) {
  if (value != 0 && value != 1) throw ArtifactError("label must be 0 or 1, got " + std::to_string(value));
  return static_cast<Label>(value);
}

std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "train";
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "validation") return Split::validation;
  if (s == "test") return Split::test;
  throw ArtifactError("unknown split tag '" + std::string(s) + "'");
}

std::vector<FeatureVector> Dataset::vectors(Split split) const {
  std::vector<FeatureVector> out;
  for (const auto& s : samples)
    if (s.split == split) out.push_back(s.vector);
  return out;
}

std::vector<FeatureVector> Dataset::vectors(Split split, Label label) const {
  std::vector<FeatureVector> out;
  for (const auto& s : samples)
    if (s.split == split && s.label == label) out.push_back(s.vector);
  return out;
}

std::vector<LabeledSample> Dataset::subset(Split split) const {
  std::vector<LabeledSample> out;
  for (const auto& s : samples)
    if (s.split == split) out.push_back(s);
  return out;
}

std::size_t Dataset::count(Split split) const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [&](const LabeledSample& s) { return s.split == split; }));
}

std::size_t Dataset::count(Split split, Label label) const {
  return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(), [&](const LabeledSample& s) {
    return s.split == split && s.label == label;
  }));
}

void assign_splits(Dataset& dataset, const SplitRatio& ratio, std::uint64_t seed) {
  const double total = ratio.train + ratio.validation + ratio.test;
  if (ratio.train <= 0 || ratio.validation < 0 || ratio.test < 0 || total <= 0)
    throw ConfigError("split ratio must be nonnegative with a positive train share");
  Rng rng(seed);
  for (Label label : {Label::benign, Label::malware}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i)
      if (dataset.samples[i].label == label) idx.push_back(i);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n = static_cast<double>(idx.size());
    const auto n_train = static_cast<std::size_t>(std::llround(n * ratio.train / total));
    const auto n_val = std::min(idx.size() - n_train, static_cast<std::size_t>(std::llround(n * ratio.validation / total)));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      Split s = k < n_train ? Split::train : (k < n_train + n_val ? Split::validation : Split::test);
      dataset.samples[idx[k]].split = s;
    }
  }
}

}  // namespace malprotect
