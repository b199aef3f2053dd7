#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "malprotect/baselines.hpp"
#include "malprotect/classifier.hpp"
#include "malprotect/config.hpp"
#include "malprotect/dataset.hpp"
#include "malprotect/decision.hpp"
#include "malprotect/families.hpp"
#include "malprotect/indicators.hpp"
#include "malprotect/oracle.hpp"

namespace malprotect {

/// Trained prediction models plus the transferability material behind them.
struct ModelSet {
  std::map<std::string, std::shared_ptr<const PredictionModel>> models;  ///< keyed by kModels names
  std::shared_ptr<const MlpClassifier> substitute;
  /// Adversarial examples from training malware (adversarial training).
  std::vector<FeatureVector> training_pool;
  /// Adversarial examples from test malware (traffic mix).
  std::vector<FeatureVector> test_pool;

  const PredictionModel& at(const std::string& name) const;
  std::shared_ptr<const PredictionModel> shared(const std::string& name) const;
};

struct DefenseSet {
  Calibration calibration;
  SdThreshold sd;
  std::vector<ScoreRow> decision_rows;
  std::shared_ptr<const DecisionModel> decision_lr;
  std::shared_ptr<const DecisionModel> decision_nn;
};

struct Artifacts {
  Dataset dataset;
  FeatureFamilyTable table{FeatureFamilyTable::permissive(1)};
  ModelSet models;
  DefenseSet defenses;
};

std::pair<Dataset, FeatureFamilyTable> generate_data(const ExperimentConfig& config);

/// Vanilla MLP, substitute and transfer pools, adversarial training,
/// distillation and both ensembles.
ModelSet train_models(const ExperimentConfig& config, const Dataset& dataset, const FeatureFamilyTable& table);

/// Dataset statistics, autoencoder, maxRecLossD and the SD threshold.
DefenseSet calibrate_defenses(const ExperimentConfig& config, const Dataset& dataset);

/// Simulated score dataset (against the vanilla MLP) and both decision models.
void train_decision_models(const ExperimentConfig& config, const Dataset& dataset, const FeatureFamilyTable& table,
                           const ModelSet& models, DefenseSet& defenses);

Artifacts build_all(const ExperimentConfig& config);

/// A fresh oracle (empty history) for a defense/model pair.
std::unique_ptr<Oracle> make_oracle(const std::string& defense, const std::string& model, const Artifacts& artifacts,
                                    const ExperimentConfig& config);

// Artifact directory layout:
//   data/dataset.header.json, data/dataset.jsonl
//   models/<name>.json, models/substitute.json, models/transfer_{train,test}.jsonl
//   defense/calibration.json, defense/autoencoder.json, defense/sd_threshold.json,
//   defense/decision_dataset.csv, defense/decision_{lr,nn}.json
void save_data(const std::filesystem::path& dir, const Dataset& dataset, const FeatureFamilyTable& table);
void save_models(const std::filesystem::path& dir, const ModelSet& models);
void save_calibration(const std::filesystem::path& dir, const DefenseSet& defenses);
void save_decision(const std::filesystem::path& dir, const DefenseSet& defenses);

std::pair<Dataset, FeatureFamilyTable> load_data(const std::filesystem::path& dir);
ModelSet load_models(const std::filesystem::path& dir);
/// Calibration and SD threshold only.
DefenseSet load_calibration(const std::filesystem::path& dir);
/// Adds the decision dataset and models to `defenses`.
void load_decision(const std::filesystem::path& dir, DefenseSet& defenses, std::uint64_t split_seed,
                   double train_share = 0.8);
/// Everything; throws ArtifactError naming the first missing file.
Artifacts load_all(const std::filesystem::path& dir, const ExperimentConfig& config);

}  // namespace malprotect
