#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "malprotect/classifier.hpp"
#include "malprotect/dataset.hpp"
#include "malprotect/indicators.hpp"
#include "malprotect/training.hpp"

namespace malprotect {

enum class DecisionKind { logistic, mlp };

std::string to_string(DecisionKind kind);
DecisionKind decision_kind_from_string(const std::string& s);

/// One indicator score vector labelled with whether an attack was in
/// progress (1) or not (0).
struct ScoreRow {
  IndicatorScores scores;
  int label = 0;
  Split split = Split::train;  ///< train or validation
};

/// Tags rows 80:20 train/validation with a seeded shuffle.
void assign_decision_splits(std::vector<ScoreRow>& rows, std::uint64_t seed, double train_share = 0.8);

/// Fixed header `s1,s2,s3a,s3b,s4a,s4b,label`.
void write_decision_csv(const std::filesystem::path& path, const std::vector<ScoreRow>& rows);
std::vector<ScoreRow> read_decision_csv(const std::filesystem::path& path);

/// Classifier over the six indicator scores: attack (1) or not (0).
class DecisionModel {
 public:
  DecisionModel(DecisionKind kind, Mlp<double> net, TrainingMeta meta = {});

  /// Logistic model with the given coefficients (in s1..s4b order).
  static DecisionModel logistic(const std::array<double, kIndicatorCount>& coefficients, double intercept);
  /// Always (or never) reports an attack.
  static DecisionModel constant(bool attack);

  double attack_probability(const IndicatorScores& s) const;
  bool detects(const IndicatorScores& s) const { return attack_probability(s) >= 0.5; }

  DecisionKind kind() const noexcept { return kind_; }
  const Mlp<double>& network() const noexcept { return net_; }
  const TrainingMeta& meta() const noexcept { return meta_; }
  TrainingMeta& meta() noexcept { return meta_; }

  /// Log-odds coefficients; logistic kind only.
  std::array<double, kIndicatorCount> coefficients() const;
  double intercept() const;
  /// Attack log-odds at a score vector (any kind).
  double logit(const std::array<double, kIndicatorCount>& x) const;

 private:
  DecisionKind kind_;
  Mlp<double> net_;
  TrainingMeta meta_;
};

/// Hidden widths of the neural decision model.
inline const std::vector<std::size_t> kDecisionHidden{128, 64, 32};

DecisionModel train_decision_model(const std::vector<ScoreRow>& rows, DecisionKind kind,
                                   const TrainingParams& params, std::uint64_t seed);

double decision_accuracy(const DecisionModel& model, const std::vector<ScoreRow>& rows, Split split);

nlohmann::json decision_model_to_json(const DecisionModel& model);
DecisionModel decision_model_from_json(const nlohmann::json& j);

}  // namespace malprotect
