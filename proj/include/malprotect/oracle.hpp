#pragma once

#include <memory>
#include <ostream>
#include <string>

#include "malprotect/classifier.hpp"
#include "malprotect/decision.hpp"
#include "malprotect/history.hpp"
#include "malprotect/indicators.hpp"

namespace malprotect {

struct OracleVerdict {
  Label label = Label::benign;
  bool attack_detected = false;
  IndicatorScores scores;
  /// Malware probability used for ranking; 1.0 whenever an attack is detected.
  double internal_score = 0;
};

/// A prediction model behind an optional stateful defense. Callers outside the
/// harness only ever see `label`.
///
/// Each predict() inspects the query against the history as it stands,
/// appends the query, then answers. A detection overrides the model with a
/// malware label (the defensive action); the history is never reset by it.
class Oracle {
 public:
  Oracle(std::string defense, std::shared_ptr<const PredictionModel> model, std::size_t dim,
         std::size_t history_capacity = kDefaultHistoryCapacity);
  virtual ~Oracle() = default;
  Oracle(const Oracle&) = delete;
  Oracle& operator=(const Oracle&) = delete;

  OracleVerdict predict(const FeatureVector& q);

  /// Adds `v` to the history without answering (simulated past activity).
  void remember(const FeatureVector& v);
  void clear_history() { history_.clear(); }
  /// Starts a new attack or user session; per-session detector state resets.
  virtual void begin_session() {}

  const std::string& defense() const noexcept { return defense_; }
  const PredictionModel& model() const noexcept { return *model_; }
  const QueryHistory& history() const noexcept { return history_; }

  /// JSON-lines audit log of every verdict; nullptr disables.
  void set_verdict_log(std::ostream* log) { log_ = log; }

 protected:
  struct Inspection {
    bool attack = false;
    IndicatorScores scores;
    double rec_loss = 0;
  };
  /// Runs before `q` is appended.
  virtual Inspection inspect(const FeatureVector& q) = 0;
  /// Reconstruction loss cached alongside a remembered entry.
  virtual double entry_loss(const FeatureVector&) const { return 0; }
  /// Bare models keep no history.
  virtual bool stateful() const { return true; }

 private:
  std::string defense_;
  std::shared_ptr<const PredictionModel> model_;
  QueryHistory history_;
  std::ostream* log_ = nullptr;
  std::size_t queries_ = 0;
};

/// No defense: the prediction model's own answer.
class BareOracle final : public Oracle {
 public:
  BareOracle(std::shared_ptr<const PredictionModel> model, std::size_t dim,
             std::size_t history_capacity = kDefaultHistoryCapacity);

 protected:
  Inspection inspect(const FeatureVector&) override { return {}; }
  bool stateful() const override { return false; }
};

/// Six threat indicators fed to a decision model.
class MalProtectOracle final : public Oracle {
 public:
  MalProtectOracle(std::shared_ptr<const PredictionModel> model, Calibration calibration,
                   std::shared_ptr<const DecisionModel> decision, std::size_t dim,
                   std::size_t history_capacity = kDefaultHistoryCapacity, std::string name = "malprotect");

  const Calibration& calibration() const noexcept { return calib_; }
  const DecisionModel& decision() const noexcept { return *decision_; }

 protected:
  Inspection inspect(const FeatureVector& q) override;
  double entry_loss(const FeatureVector& v) const override;

 private:
  Calibration calib_;
  std::shared_ptr<const DecisionModel> decision_;
};

nlohmann::json verdict_to_json(const OracleVerdict& v, std::size_t query_index);

}  // namespace malprotect
