#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "malprotect/classifier.hpp"
#include "malprotect/families.hpp"

namespace malprotect {

struct TransferExample {
  std::size_t source = 0;  ///< index into the input malware list
  FeatureVector vector;
};

/// Gradient-sign transferability attack against a substitute model. Each
/// malware vector is relaxed to [0, 1], stepped by `epsilon` against the sign
/// of the benign-target cross-entropy gradient, discretized and validated
/// against the original every round. The first variant the substitute labels
/// benign is kept; samples with none within `max_rounds` are discarded.
std::vector<TransferExample> transferability_generate(const MlpClassifier& substitute,
                                                      std::span<const FeatureVector> malware,
                                                      const FeatureFamilyTable& table, double epsilon,
                                                      std::size_t max_rounds);

/// Convenience: the emitted vectors only.
std::vector<FeatureVector> transfer_vectors(const std::vector<TransferExample>& examples);

struct ContinuousAttackTally {
  std::size_t attempted = 0;
  /// Real-valued adversarial points the model labels benign.
  std::size_t continuous_evasions = 0;
  /// Of those, how many still evade after thresholding alone.
  std::size_t discretized_evasions = 0;
  /// Of those, how many still evade after thresholding plus validity restoration.
  std::size_t surviving_evasions = 0;
};

/// A domain-agnostic continuous attack: small gradient-sign steps of size
/// `step` on the real-valued input until the model flips, with no regard for
/// binary features or family permissions. Then checks which adversarial
/// points survive discretization and validity restoration.
ContinuousAttackTally naive_continuous_attack(const MlpClassifier& model, std::span<const FeatureVector> malware,
                                              const FeatureFamilyTable& table, double step, std::size_t max_iters);

}  // namespace malprotect
