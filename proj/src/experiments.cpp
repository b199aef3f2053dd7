#include "malprotect/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "malprotect/errors.hpp"

namespace malprotect {

void init_history(Oracle& oracle, std::span<const FeatureVector> training, std::size_t n_init, std::uint64_t seed) {
  if (n_init > oracle.history().capacity()) throw ConfigError("n_init exceeds the history capacity");
  if (n_init == 0) return;
  if (training.empty()) throw ConfigError("init_history needs training vectors");
  Rng rng(seed);
  std::vector<std::size_t> order(training.size());
  std::size_t used = order.size();
  for (std::size_t k = 0; k < n_init; ++k) {
    if (used == order.size()) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      used = 0;
    }
    oracle.remember(training[order[used++]]);
  }
}

std::vector<FeatureVector> attack_samples(const Dataset& dataset, const PredictionModel& model, std::size_t count) {
  std::vector<FeatureVector> out;
  for (const auto& s : dataset.samples) {
    if (out.size() == count) break;
    if (s.split == Split::test && s.label == Label::malware && model.predict_label(s.vector) == Label::malware)
      out.push_back(s.vector);
  }
  return out;
}

std::uint64_t attack_seed(std::uint64_t seed, std::size_t sample_index) {
  std::uint64_t z = seed * 0x100000001b3ULL + 0x9e3779b97f4a7c15ULL * (sample_index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

std::uint64_t history_seed(std::uint64_t seed) { return attack_seed(seed, 0xffff'ffffULL); }

const BenignFeaturePool& pool_for(AttackStrategy s, const BenignFeaturePool& random, const BenignFeaturePool& sorted) {
  return s == AttackStrategy::blackbox ? random : sorted;
}

}  // namespace

EvasionCell run_evasion_cell(const Artifacts& artifacts, const ExperimentConfig& config, const std::string& defense,
                             const std::string& model, const AttackConfig& attack,
                             std::span<const FeatureVector> samples) {
  EvasionCell cell;
  cell.defense = defense;
  cell.model = model;
  cell.n_max = attack.n_max;
  cell.seed = attack.seed;

  const auto random_pool = build_pool(artifacts.dataset, PoolMode::random, attack.seed);
  const auto sorted_pool = build_pool(artifacts.dataset, PoolMode::frequency, attack.seed);
  const auto& pool = pool_for(attack.strategy, random_pool, sorted_pool);

  auto oracle = make_oracle(defense, model, artifacts, config);
  const auto training = artifacts.dataset.vectors(Split::train);
  init_history(*oracle, training, config.n_init, history_seed(attack.seed));

  std::vector<std::size_t> detections;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    AttackConfig ac = attack;
    ac.seed = attack_seed(attack.seed, i);
    AttackResult r = attack_oracle(*oracle, samples[i], pool, ac, artifacts.table);
    switch (r.outcome) {
      case AttackOutcome::success: ++cell.successes; break;
      case AttackOutcome::failure: ++cell.failures; break;
      case AttackOutcome::excluded: ++cell.excluded; break;
    }
    if (auto first = r.first_detection()) detections.push_back(*first);
    cell.results.push_back(std::move(r));
  }
  const std::size_t counted = cell.successes + cell.failures;
  if (counted == 0) throw ConfigError("every attack sample was excluded; evasion rate is undefined");
  cell.evasion_rate = double(cell.successes) / double(counted);
  cell.median_detection_queries = median_or_minus_one(std::move(detections));
  return cell;
}

std::vector<EvasionCell> run_evasion_sweep(const Artifacts& artifacts, const ExperimentConfig& config) {
  std::vector<EvasionCell> cells;
  for (const auto& model : config.models) {
    const auto samples = attack_samples(artifacts.dataset, artifacts.models.at(model), config.n_attack_samples);
    for (const auto& defense : config.defenses)
      for (auto n_max : config.n_max_grid)
        for (auto seed : config.seeds) {
          const AttackConfig ac{config.attack, n_max, config.adaptive_m, config.adaptive_p, seed};
          auto cell = run_evasion_cell(artifacts, config, defense, model, ac, samples);
          cell.results.clear();
          cells.push_back(std::move(cell));
        }
  }
  return cells;
}

MixCounts mix_counts(std::size_t total, double k) {
  MixCounts c;
  c.adversarial = static_cast<std::size_t>(std::llround(k * double(total)));
  c.benign = (total - c.adversarial) / 2;
  c.malware = total - c.adversarial - c.benign;
  return c;
}

MixCell run_traffic_mix(const Artifacts& artifacts, const ExperimentConfig& config, const std::string& defense,
                        const std::string& model, double k, std::uint64_t seed) {
  const auto& adversarial = artifacts.models.test_pool;
  const auto counts = mix_counts(config.mix_queries, k);
  if (counts.adversarial > 0 && adversarial.empty()) throw ConfigError("adversarial pool is empty");
  // Held-out data only; the test split alone is too small to fill low-k streams without repeats.
  auto held_out = [&](Label label) {
    auto v = artifacts.dataset.vectors(Split::validation, label);
    auto t = artifacts.dataset.vectors(Split::test, label);
    v.insert(v.end(), t.begin(), t.end());
    return v;
  };
  const auto benign = held_out(Label::benign);
  const auto malware = held_out(Label::malware);
  if ((counts.benign > 0 && benign.empty()) || (counts.malware > 0 && malware.empty()))
    throw ConfigError("held-out splits lack samples for the traffic mix");

  Rng rng(attack_seed(seed, 0x3117));
  struct Item {
    const FeatureVector* v;
    Label truth;
  };
  std::vector<Item> stream;
  auto draw = [&](const std::vector<FeatureVector>& source, std::size_t n, Label truth) {
    std::vector<std::size_t> order(source.size());
    std::size_t used = order.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (used == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        used = 0;
      }
      stream.push_back({&source[order[used++]], truth});
    }
  };
  draw(adversarial, counts.adversarial, Label::malware);
  draw(benign, counts.benign, Label::benign);
  draw(malware, counts.malware, Label::malware);
  std::shuffle(stream.begin(), stream.end(), rng);

  auto oracle = make_oracle(defense, model, artifacts, config);
  init_history(*oracle, artifacts.dataset.vectors(Split::train), config.n_init, history_seed(seed));
  oracle->begin_session();

  MixCell cell;
  cell.defense = defense;
  cell.model = model;
  cell.k = k;
  cell.seed = seed;
  std::vector<Label> predicted;
  std::vector<double> scores;
  for (const auto& item : stream) {
    const auto v = oracle->predict(*item.v);
    cell.truth.push_back(item.truth);
    predicted.push_back(v.label);
    scores.push_back(v.internal_score);
    cell.verdicts.push_back(v);
  }
  cell.metrics = compute_metrics(cell.truth, predicted, scores);
  return cell;
}

std::vector<MixCell> run_traffic_sweep(const Artifacts& artifacts, const ExperimentConfig& config) {
  std::vector<MixCell> cells;
  for (const auto& defense : config.defenses)
    for (double k : config.k_grid)
      for (auto seed : config.seeds) {
        auto cell = run_traffic_mix(artifacts, config, defense, config.mix_model, k, seed);
        cell.verdicts.clear();
        cell.truth.clear();
        cells.push_back(std::move(cell));
      }
  return cells;
}

std::string format_real(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ArtifactError("cannot write " + path.string());
  return out;
}

}  // namespace

void write_sweep_csv(const std::filesystem::path& path, std::span<const EvasionCell> cells) {
  auto out = open_csv(path);
  out << "defense,model,n_max,seed,evasion_rate,median_detection_queries\n";
  for (const auto& c : cells)
    out << c.defense << ',' << c.model << ',' << c.n_max << ',' << c.seed << ',' << format_real(c.evasion_rate) << ','
        << format_real(c.median_detection_queries, 1) << '\n';
}

void write_mix_csv(const std::filesystem::path& path, std::span<const MixCell> cells) {
  auto out = open_csv(path);
  out << "defense,model,k,seed,accuracy,fpr,f1,auc\n";
  for (const auto& c : cells)
    out << c.defense << ',' << c.model << ',' << format_real(c.k, 2) << ',' << c.seed << ','
        << format_real(c.metrics.accuracy) << ',' << format_real(c.metrics.fpr) << ',' << format_real(c.metrics.f1)
        << ',' << format_real(c.metrics.auc) << '\n';
}

}  // namespace malprotect
