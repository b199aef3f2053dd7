#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "malprotect/attacks.hpp"
#include "malprotect/metrics.hpp"
#include "malprotect/oracle.hpp"
#include "malprotect/pipeline.hpp"

namespace malprotect {

/// Seeds the history with `n_init` training vectors drawn without replacement
/// (cycling through a fresh shuffle if there are fewer vectors than that).
/// Throws ConfigError when n_init exceeds the history capacity.
void init_history(Oracle& oracle, std::span<const FeatureVector> training, std::size_t n_init, std::uint64_t seed);

/// The first `count` test malware samples the model labels malware.
std::vector<FeatureVector> attack_samples(const Dataset& dataset, const PredictionModel& model, std::size_t count);

struct EvasionCell {
  std::string defense;
  std::string model;
  std::size_t n_max = 0;
  std::uint64_t seed = 0;
  std::size_t successes = 0;
  std::size_t failures = 0;
  std::size_t excluded = 0;
  double evasion_rate = 0;
  /// Median 1-based query index of the first detection over detected
  /// attacks; -1 when no attack was detected.
  double median_detection_queries = -1;
  std::vector<AttackResult> results;
};

/// One fresh oracle, one seeded history, then each sample attacked in turn
/// against that same oracle. Throws ConfigError if every sample is excluded.
EvasionCell run_evasion_cell(const Artifacts& artifacts, const ExperimentConfig& config, const std::string& defense,
                             const std::string& model, const AttackConfig& attack,
                             std::span<const FeatureVector> samples);

/// Attack seeds for sample i are shared across defenses so comparisons pair up.
std::uint64_t attack_seed(std::uint64_t seed, std::size_t sample_index);

/// Every (defense, model, n_max, seed) of the config.
std::vector<EvasionCell> run_evasion_sweep(const Artifacts& artifacts, const ExperimentConfig& config);

struct MixCell {
  std::string defense;
  std::string model;
  double k = 0;
  std::uint64_t seed = 0;
  MetricsReport metrics;
  std::vector<Label> truth;
  std::vector<OracleVerdict> verdicts;
};

struct MixCounts {
  std::size_t adversarial = 0, benign = 0, malware = 0;
};
/// round(k N) adversarial; the rest split evenly, benign taking the floor.
MixCounts mix_counts(std::size_t total, double k);

/// Adversarial share k of `total` queries mixed with held-out benign and
/// non-adversarial malware (validation and test splits), shuffled, answered by a fresh oracle after
/// init_history. Throws ConfigError on an empty adversarial pool.
MixCell run_traffic_mix(const Artifacts& artifacts, const ExperimentConfig& config, const std::string& defense,
                        const std::string& model, double k, std::uint64_t seed);

std::vector<MixCell> run_traffic_sweep(const Artifacts& artifacts, const ExperimentConfig& config);

void write_sweep_csv(const std::filesystem::path& path, std::span<const EvasionCell> cells);
void write_mix_csv(const std::filesystem::path& path, std::span<const MixCell> cells);

/// Fixed-point rendering used by every CSV so reruns compare byte for byte.
std::string format_real(double v, int digits = 6);

}  // namespace malprotect
