#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "malprotect/attacks.hpp"
#include "malprotect/classifier.hpp"
#include "malprotect/dataset.hpp"
#include "malprotect/decision.hpp"
#include "malprotect/families.hpp"
#include "malprotect/indicators.hpp"

namespace malprotect {

/// One kind of attack session in the simulated traffic, drawn with
/// probability proportional to `weight`.
struct AttackMixEntry {
  AttackStrategy strategy = AttackStrategy::graybox;
  double weight = 1;
  std::size_t m = 20;
  /// Adaptive removal fraction; each session draws one value from this list.
  std::vector<double> p_values{0.0};
};

struct DecisionSimConfig {
  std::size_t n_legit_sessions = 12;
  std::size_t legit_session_length = 60;
  std::size_t n_attack_sessions = 24;
  std::size_t attack_n_max = 40;
  /// History entries seeded from training data before each session.
  std::size_t n_init = 300;
  /// Share of attack sessions answered with malware throughout, so the
  /// trajectory runs its full budget.
  double defended_share = 0.5;
  std::vector<AttackMixEntry> attack_mix{
      {AttackStrategy::blackbox, 1, 20, {0.0}},
      {AttackStrategy::graybox, 1, 20, {0.0}},
      {AttackStrategy::adaptive, 2, 20, {0.0, 0.25, 0.5, 0.75, 1.0}},
  };
  /// Sessions that repeat one malware sample attack_n_max times.
  std::size_t n_flood_sessions = 4;
  std::size_t min_rows = 1000;
  double train_share = 0.8;

  void validate() const;
};

/// Replays simulated user sessions (label 0 for every query), attack sessions
/// and duplicate floods (label 1 for every query, probe included) against a recording
/// oracle built from `calibration` and `model`, starting each session from a
/// history of `n_init` random training samples. Legitimate sessions query
/// training samples that were not used to seed that session's history.
/// Throws ConfigError when fewer than `min_rows` rows result.
std::vector<ScoreRow> generate_decision_dataset(std::shared_ptr<const PredictionModel> model, const Dataset& dataset,
                                                const FeatureFamilyTable& table, const Calibration& calibration,
                                                const DecisionSimConfig& config, std::uint64_t seed);

}  // namespace malprotect
