#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "malprotect/classifier.hpp"
#include "malprotect/dataset.hpp"
#include "malprotect/training.hpp"

namespace malprotect {

struct AdversarialTrainingReport {
  std::size_t injected = 0;
  std::vector<std::string> warnings;
};

/// min(pool_size, floor(fraction * train_size)).
std::size_t adversarial_quota(std::size_t train_size, std::size_t pool_size, double fraction);

/// Retrains on the train split augmented with up to `fraction` x |train|
/// adversarial examples labelled malware (seeded choice when the pool is
/// larger than the quota). An empty pool falls back to vanilla training and
/// records a warning.
MlpClassifier adversarially_train(const Dataset& base, std::span<const FeatureVector> adversarial, double fraction,
                                  const std::vector<std::size_t>& hidden, const TrainingParams& params,
                                  std::uint64_t seed, AdversarialTrainingReport* report = nullptr);

/// Trains a student of the teacher's architecture on the teacher's
/// temperature-softened distribution over the train split. The student keeps
/// the temperature for inference; labels are unaffected by it.
MlpClassifier distill(const MlpClassifier& teacher, const Dataset& dataset, double temperature,
                      const TrainingParams& params, std::uint64_t seed);

/// One member per entry of `member_hidden`, each with its own seed.
EnsembleModel train_ensemble(const Dataset& dataset, VoteMode mode,
                             const std::vector<std::vector<std::size_t>>& member_hidden, const TrainingParams& params,
                             std::uint64_t seed);

}  // namespace malprotect
