#include "malprotect/decision_data.hpp"

#include <algorithm>
#include <numeric>

#include "malprotect/errors.hpp"
#include "malprotect/oracle.hpp"

namespace malprotect {

void DecisionSimConfig::validate() const {
  if (n_legit_sessions + n_attack_sessions + n_flood_sessions == 0) throw ConfigError("decision simulation has no sessions");
  if (n_legit_sessions > 0 && legit_session_length == 0) throw ConfigError("legitimate session length must be positive");
  if (n_attack_sessions + n_flood_sessions > 0 && attack_n_max == 0) throw ConfigError("attack sessions need n_max >= 1");
  if (n_attack_sessions > 0) {
    if (attack_mix.empty()) throw ConfigError("attack mix is empty");
    for (const auto& e : attack_mix) {
      if (!(e.weight >= 0)) throw ConfigError("attack mix weights must be nonnegative");
      if (e.p_values.empty()) throw ConfigError("attack mix entry needs at least one p value");
      AttackConfig{e.strategy, attack_n_max, e.m, 0, 0}.validate();
      for (double p : e.p_values) AttackConfig{e.strategy, attack_n_max, e.m, p, 0}.validate();
    }
  }
  if (!(defended_share >= 0 && defended_share <= 1)) throw ConfigError("defended_share must lie in [0, 1]");
  if (!(train_share > 0 && train_share < 1)) throw ConfigError("train_share must lie in (0, 1)");
}

namespace {

/// Attack-side view of the recording oracle that keeps every score vector.
class ScoreRecorder final : public LabelOracle {
 public:
  explicit ScoreRecorder(Oracle& oracle) : oracle_(oracle) {}
  Label query(const FeatureVector& q) override {
    const OracleVerdict v = oracle_.predict(q);
    scores.push_back(v.scores);
    return v.label;
  }
  std::vector<IndicatorScores> scores;

 private:
  Oracle& oracle_;
};

}  // namespace

std::vector<ScoreRow> generate_decision_dataset(std::shared_ptr<const PredictionModel> model, const Dataset& dataset,
                                                const FeatureFamilyTable& table, const Calibration& calibration,
                                                const DecisionSimConfig& config, std::uint64_t seed) {
  config.validate();
  calibration.validate();
  const auto train = dataset.subset(Split::train);
  if (train.size() < 2) throw ConfigError("decision simulation needs training samples");
  if (config.n_init >= train.size()) throw ConfigError("n_init must be smaller than the training split");

  std::vector<FeatureVector> attack_sources;
  for (const auto& s : train)
    if (s.label == Label::malware && model->predict_label(s.vector) == Label::malware) attack_sources.push_back(s.vector);
  if (config.n_attack_sessions + config.n_flood_sessions > 0 && attack_sources.empty())
    throw ConfigError("no training malware is detected by the prediction model; nothing to attack");

  const auto random_pool = build_pool(dataset, PoolMode::random, seed ^ 0x5eedULL);
  const auto sorted_pool = build_pool(dataset, PoolMode::frequency, 0);

  auto pass = std::make_shared<const DecisionModel>(DecisionModel::constant(false));
  auto block = std::make_shared<const DecisionModel>(DecisionModel::constant(true));

  Rng rng(seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  auto fresh_oracle = [&](bool defended) {
    auto oracle = std::make_unique<MalProtectOracle>(model, calibration, defended ? block : pass, dataset.dim);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < config.n_init; ++i) oracle->remember(train[order[i]].vector);
    return oracle;
  };

  std::vector<ScoreRow> rows;
  for (std::size_t s = 0; s < config.n_legit_sessions; ++s) {
    auto oracle = fresh_oracle(false);
    // Queries come from the part of `order` not used to seed the history.
    const std::size_t available = train.size() - config.n_init;
    for (std::size_t k = 0; k < config.legit_session_length; ++k) {
      const auto& q = train[order[config.n_init + (k % available)]].vector;
      rows.push_back({oracle->predict(q).scores, 0, Split::train});
    }
  }

  std::vector<double> weights;
  for (const auto& e : config.attack_mix) weights.push_back(e.weight);
  std::discrete_distribution<std::size_t> pick_entry(weights.begin(), weights.end());
  std::bernoulli_distribution defended(config.defended_share);
  for (std::size_t s = 0; s < config.n_attack_sessions; ++s) {
    const auto& entry = config.attack_mix[pick_entry(rng)];
    const double p = entry.p_values[std::uniform_int_distribution<std::size_t>(0, entry.p_values.size() - 1)(rng)];
    const auto& x = attack_sources[std::uniform_int_distribution<std::size_t>(0, attack_sources.size() - 1)(rng)];
    auto oracle = fresh_oracle(defended(rng));
    ScoreRecorder recorder(*oracle);
    const AttackConfig ac{entry.strategy, config.attack_n_max, entry.m, p, rng()};
    run_attack(recorder, x, ac.strategy == AttackStrategy::blackbox ? random_pool : sorted_pool, ac, table);
    for (const auto& sc : recorder.scores) rows.push_back({sc, 1, Split::train});
  }

  for (std::size_t s = 0; s < config.n_flood_sessions; ++s) {
    const auto& x = attack_sources[std::uniform_int_distribution<std::size_t>(0, attack_sources.size() - 1)(rng)];
    auto oracle = fresh_oracle(false);
    for (std::size_t k = 0; k < config.attack_n_max; ++k) rows.push_back({oracle->predict(x).scores, 1, Split::train});
  }

  if (rows.size() < config.min_rows)
    throw ConfigError("decision simulation produced " + std::to_string(rows.size()) + " rows; at least " +
                      std::to_string(config.min_rows) + " required");
  assign_decision_splits(rows, seed, config.train_share);
  return rows;
}

}  // namespace malprotect
