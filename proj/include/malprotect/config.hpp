#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "malprotect/attacks.hpp"
#include "malprotect/decision_data.hpp"
#include "malprotect/synthetic.hpp"
#include "malprotect/training.hpp"

namespace malprotect {

inline const std::vector<std::string> kDefenses{"none", "malprotect-lr", "malprotect-nn", "l0", "prada", "sd"};
inline const std::vector<std::string> kModels{"mlp", "nn-at", "nn-dd", "majority", "veto"};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  SyntheticConfig data;

  // Prediction models.
  std::vector<std::size_t> hidden = kDefaultHidden;
  TrainingParams model_training{20, 0.05, 32};
  std::vector<std::size_t> substitute_hidden{64, 32};
  double adversarial_fraction = 0.25;
  double transfer_epsilon = 0.1;
  std::size_t transfer_rounds = 30;
  double distill_temperature = 20;
  std::vector<std::vector<std::size_t>> ensemble_hidden{{128, 64, 32}, {96, 48}, {64, 32, 16}};

  // Defense components.
  TrainingParams autoencoder_training{30, 0.5, 32};
  bool autoencoder_benign_only = false;
  std::size_t pair_budget = 100'000;
  std::size_t min_history = 30;
  bool clamp_scores = true;
  DecisionSimConfig decision_sim;
  TrainingParams decision_training_logistic{300, 0.5, 32};
  TrainingParams decision_training_mlp{80, 0.05, 32};
  std::size_t history_capacity = 10'000;
  std::size_t l0_threshold = 10;
  std::size_t sd_k = 50;
  double sd_percentile = 0.1;
  double prada_delta = 0.9;

  // Experiments.
  std::size_t n_init = 300;
  std::vector<std::string> defenses = kDefenses;
  std::vector<std::string> models = kModels;
  AttackStrategy attack = AttackStrategy::graybox;
  std::size_t adaptive_m = 20;
  double adaptive_p = 0;
  std::vector<std::size_t> n_max_grid{100, 200, 300, 400, 500};
  std::size_t n_attack_samples = 200;
  std::vector<double> k_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::size_t mix_queries = 1000;
  std::string mix_model = "nn-at";
  std::vector<std::size_t> q_grid{10'000, 20'000, 30'000, 40'000, 50'000};
  std::size_t bench_predictions = 100;
  std::size_t bench_repeats = 5;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string output_dir = "out";

  /// Throws ConfigError on any out-of-range field.
  void validate() const;
};

nlohmann::json config_to_json(const ExperimentConfig& c);
/// Fields absent from `j` keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// 64-bit FNV-1a of the canonical JSON dump.
std::uint64_t config_hash(const ExperimentConfig& c);
std::string hex64(std::uint64_t v);

}  // namespace malprotect
