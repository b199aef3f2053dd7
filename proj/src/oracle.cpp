#include "malprotect/oracle.hpp"

#include "malprotect/errors.hpp"

namespace malprotect {

Oracle::Oracle(std::string defense, std::shared_ptr<const PredictionModel> model, std::size_t dim,
               std::size_t history_capacity)
    : defense_(std::move(defense)), model_(std::move(model)), history_(dim, history_capacity) {
  if (!model_) throw ConfigError("oracle needs a prediction model");
}

OracleVerdict Oracle::predict(const FeatureVector& q) {
  if (q.dim() != history_.dim()) throw DimensionMismatch("query dimension differs from oracle dimension");
  Inspection ins = inspect(q);
  if (stateful()) history_.append(q, ins.rec_loss);

  OracleVerdict v;
  v.scores = ins.scores;
  v.attack_detected = ins.attack;
  if (ins.attack) {
    v.label = Label::malware;
    v.internal_score = 1.0;
  } else {
    v.internal_score = model_->predict_proba(q);
    v.label = model_->predict_label(q);
  }
  if (log_) *log_ << verdict_to_json(v, queries_).dump() << '\n';
  ++queries_;
  return v;
}

void Oracle::remember(const FeatureVector& v) {
  if (!stateful()) return;
  history_.append(v, entry_loss(v));
}

BareOracle::BareOracle(std::shared_ptr<const PredictionModel> model, std::size_t dim, std::size_t history_capacity)
    : Oracle("none", std::move(model), dim, history_capacity) {}

MalProtectOracle::MalProtectOracle(std::shared_ptr<const PredictionModel> model, Calibration calibration,
                                   std::shared_ptr<const DecisionModel> decision, std::size_t dim,
                                   std::size_t history_capacity, std::string name)
    : Oracle(std::move(name), std::move(model), dim, history_capacity),
      calib_(std::move(calibration)),
      decision_(std::move(decision)) {
  calib_.validate();
  if (!decision_) throw ConfigError("MalProtect oracle needs a decision model");
  if (calib_.autoencoder->dim() != dim) throw DimensionMismatch("autoencoder dimension differs from oracle dimension");
}

Oracle::Inspection MalProtectOracle::inspect(const FeatureVector& q) {
  const ScoredQuery sq = compute_scores(q, history(), calib_);
  return {decision_->detects(sq.scores), sq.scores, sq.rec_loss};
}

double MalProtectOracle::entry_loss(const FeatureVector& v) const { return calib_.autoencoder->reconstruction_loss(v); }

nlohmann::json verdict_to_json(const OracleVerdict& v, std::size_t query_index) {
  nlohmann::json scores;
  const auto a = v.scores.as_array();
  for (std::size_t j = 0; j < kIndicatorCount; ++j) scores[kIndicatorNames[j]] = a[j];
  return {{"query", query_index},
          {"label", to_int(v.label)},
          {"attack_detected", v.attack_detected},
          {"internal_score", v.internal_score},
          {"scores", scores}};
}

}  // namespace malprotect
