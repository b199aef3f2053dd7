#include "malprotect/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "malprotect/errors.hpp"
#include "malprotect/perturb.hpp"

namespace malprotect {

BenignFeaturePool build_pool(std::span<const FeatureVector> benign, std::size_t dim, PoolMode mode,
                             std::uint64_t seed) {
  if (benign.empty()) throw ConfigError("benign feature pool needs benign samples");
  BenignFeaturePool pool;
  pool.mode = mode;
  pool.frequencies.assign(dim, 0);
  for (const auto& v : benign) {
    if (v.dim() != dim) throw DimensionMismatch("benign sample dimension mismatch");
    for (auto i : v.enabled()) ++pool.frequencies[i];
  }
  pool.ordering.resize(dim);
  std::iota(pool.ordering.begin(), pool.ordering.end(), FeatureIndex{0});
  if (mode == PoolMode::random) {
    Rng rng(seed);
    std::shuffle(pool.ordering.begin(), pool.ordering.end(), rng);
  } else {
    std::stable_sort(pool.ordering.begin(), pool.ordering.end(), [&](FeatureIndex a, FeatureIndex b) {
      return pool.frequencies[a] > pool.frequencies[b];
    });
  }
  return pool;
}

BenignFeaturePool build_pool(const Dataset& dataset, PoolMode mode, std::uint64_t seed) {
  const auto benign = dataset.vectors(Split::train, Label::benign);
  return build_pool(benign, dataset.dim, mode, seed);
}

std::string to_string(AttackStrategy s) {
  switch (s) {
    case AttackStrategy::blackbox: return "blackbox";
    case AttackStrategy::graybox: return "graybox";
    case AttackStrategy::adaptive: return "adaptive";
  }
  return "?";
}

AttackStrategy attack_strategy_from_string(const std::string& s) {
  if (s == "blackbox" || s == "black-box") return AttackStrategy::blackbox;
  if (s == "graybox" || s == "gray-box" || s == "greybox") return AttackStrategy::graybox;
  if (s == "adaptive") return AttackStrategy::adaptive;
  throw ConfigError("unknown attack strategy '" + s + "'");
}

void AttackConfig::validate() const {
  if (n_max == 0) throw ConfigError("n_max must be positive");
  if (strategy == AttackStrategy::adaptive) {
    if (m == 0) throw ConfigError("adaptive attack needs m >= 1");
    if (!(p >= 0 && p <= 1)) throw ConfigError("adaptive removal fraction p must lie in [0, 1]");
  }
}

std::string to_string(AttackOutcome o) {
  switch (o) {
    case AttackOutcome::success: return "success";
    case AttackOutcome::failure: return "failure";
    case AttackOutcome::excluded: return "excluded";
  }
  return "?";
}

std::optional<std::size_t> AttackResult::first_detection() const {
  for (std::size_t i = 0; i < detection_trace.size(); ++i)
    if (detection_trace[i]) return i + 1;
  return std::nullopt;
}

Label QueryChannel::query(const FeatureVector& q) {
  const OracleVerdict v = oracle_.predict(q);
  records_.push_back({records_.size(), l0_distance(original_, q), v.label, v.attack_detected});
  return v.label;
}

namespace {

/// Moves a uniform `count`-subset of `items` to the front (partial Fisher-Yates).
template <typename T>
void choose_front(std::vector<T>& items, std::size_t count, Rng& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, items.size() - 1);
    std::swap(items[i], items[pick(rng)]);
  }
}

FeatureVector from_bits(const std::vector<char>& bits) {
  std::vector<FeatureIndex> enabled;
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) enabled.push_back(static_cast<FeatureIndex>(i));
  return FeatureVector(bits.size(), std::move(enabled));
}

}  // namespace

AttackResult run_attack(LabelOracle& oracle, const FeatureVector& x, const BenignFeaturePool& pool,
                        const AttackConfig& config, const FeatureFamilyTable& table) {
  config.validate();
  if (table.dim() != x.dim()) throw DimensionMismatch("family table dimension differs from sample");
  const bool adaptive = config.strategy == AttackStrategy::adaptive;
  if (config.strategy == AttackStrategy::blackbox && pool.mode != PoolMode::random)
    throw ConfigError("black-box attack expects a randomly ordered pool");
  if (config.strategy != AttackStrategy::blackbox && pool.mode != PoolMode::frequency)
    throw ConfigError("gray-box and adaptive attacks expect a frequency-sorted pool");

  AttackResult result;
  result.final_vector = x;
  if (oracle.query(x) == Label::benign) {
    result.outcome = AttackOutcome::excluded;
    result.queries_used = 1;
    return result;
  }

  Rng rng(config.seed);
  std::vector<FeatureIndex> scratch(pool.ordering);
  std::vector<FeatureIndex> removable;
  std::vector<char> bits(x.dim(), 0);
  for (auto i : x.enabled()) bits[i] = 1;
  const std::size_t cap = adaptive ? std::min(config.m, pool.size()) : pool.size();

  std::size_t n = 0;
  Label label = Label::malware;
  FeatureVector current = x;
  while (label == Label::malware && n < config.n_max && n < pool.size()) {
    bits[pool.ordering[n]] = 1;

    const std::size_t r = std::uniform_int_distribution<std::size_t>(0, cap)(rng);
    choose_front(scratch, r, rng);
    for (std::size_t i = 0; i < r; ++i) bits[scratch[i]] = 1;

    if (adaptive) {
      removable.clear();
      for (std::size_t f = 0; f < bits.size(); ++f)
        if (bits[f] && table.can_remove(static_cast<FeatureIndex>(f))) removable.push_back(static_cast<FeatureIndex>(f));
      const auto k = static_cast<std::size_t>(std::floor(config.p * double(removable.size())));
      if (k > 0) {
        choose_front(removable, k, rng);
        for (std::size_t i = 0; i < k; ++i) bits[removable[i]] = 0;
      }
    }

    current = validate_perturbations(x, from_bits(bits), table);
    std::fill(bits.begin(), bits.end(), 0);
    for (auto i : current.enabled()) bits[i] = 1;
    ++n;
    label = oracle.query(current);
  }
  result.queries_used = n;
  result.final_vector = current;
  result.outcome = label == Label::benign ? AttackOutcome::success : AttackOutcome::failure;
  return result;
}

AttackResult run_blackbox(LabelOracle& oracle, const FeatureVector& x, const BenignFeaturePool& pool,
                          std::size_t n_max, const FeatureFamilyTable& table, std::uint64_t seed) {
  return run_attack(oracle, x, pool, {AttackStrategy::blackbox, n_max, 1, 0, seed}, table);
}

AttackResult run_graybox(LabelOracle& oracle, const FeatureVector& x, const BenignFeaturePool& pool,
                         std::size_t n_max, const FeatureFamilyTable& table, std::uint64_t seed) {
  return run_attack(oracle, x, pool, {AttackStrategy::graybox, n_max, 1, 0, seed}, table);
}

AttackResult run_adaptive(LabelOracle& oracle, const FeatureVector& x, const BenignFeaturePool& pool,
                          std::size_t n_max, std::size_t m, double p, const FeatureFamilyTable& table,
                          std::uint64_t seed) {
  return run_attack(oracle, x, pool, {AttackStrategy::adaptive, n_max, m, p, seed}, table);
}

AttackResult attack_oracle(Oracle& oracle, const FeatureVector& x, const BenignFeaturePool& pool,
                           const AttackConfig& config, const FeatureFamilyTable& table, std::ostream* trace) {
  oracle.begin_session();
  QueryChannel channel(oracle, x);
  AttackResult result = run_attack(channel, x, pool, config, table);
  const auto& records = channel.records();
  for (std::size_t i = 1; i < records.size(); ++i) result.detection_trace.push_back(records[i].attack_detected);
  if (trace) {
    for (const auto& r : records)
      *trace << nlohmann::json{{"n", r.n},
                               {"l0_from_original", r.l0_from_original},
                               {"oracle_label", to_int(r.oracle_label)},
                               {"attack_detected", r.attack_detected}}
                    .dump()
             << '\n';
  }
  return result;
}

}  // namespace malprotect
