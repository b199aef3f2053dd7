#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "malprotect/dataset.hpp"
#include "malprotect/families.hpp"
#include "malprotect/feature_vector.hpp"
#include "malprotect/oracle.hpp"

namespace malprotect {

enum class PoolMode { random, frequency };

/// Candidate features for transplantation, in the order an attack consumes
/// them as per-iteration anchors.
struct BenignFeaturePool {
  PoolMode mode = PoolMode::random;
  std::vector<FeatureIndex> ordering;
  /// Count of benign training samples enabling each feature.
  std::vector<std::size_t> frequencies;

  std::size_t size() const noexcept { return ordering.size(); }
};

/// Every feature of the space enters the pool. Random mode shuffles with the
/// seed; frequency mode sorts by benign frequency, most frequent first, ties
/// by ascending index. Throws ConfigError when there are no benign samples.
BenignFeaturePool build_pool(std::span<const FeatureVector> benign, std::size_t dim, PoolMode mode,
                             std::uint64_t seed);
/// Uses the benign training split.
BenignFeaturePool build_pool(const Dataset& dataset, PoolMode mode, std::uint64_t seed);

enum class AttackStrategy { blackbox, graybox, adaptive };
std::string to_string(AttackStrategy s);
AttackStrategy attack_strategy_from_string(const std::string& s);

struct AttackConfig {
  AttackStrategy strategy = AttackStrategy::graybox;
  std::size_t n_max = 500;
  std::size_t m = 20;  ///< adaptive bulk-add cap
  double p = 0;        ///< adaptive removal fraction
  std::uint64_t seed = 0;

  void validate() const;
};

enum class AttackOutcome { success, failure, excluded };
std::string to_string(AttackOutcome o);

struct AttackResult {
  AttackOutcome outcome = AttackOutcome::failure;
  /// Perturbed queries issued, not counting the initial probe of X.
  std::size_t queries_used = 0;
  FeatureVector final_vector;
  /// attack_detected for each perturbed query, filled in from the oracle side.
  std::vector<bool> detection_trace;

  /// 1-based index of the first detected query, if any.
  std::optional<std::size_t> first_detection() const;
};

/// What an attack sees of its target: the label and nothing else.
class LabelOracle {
 public:
  virtual ~LabelOracle() = default;
  virtual Label query(const FeatureVector& q) = 0;
};

/// Adapts a function; keeps every query for inspection.
class FunctionOracle final : public LabelOracle {
 public:
  explicit FunctionOracle(std::function<Label(const FeatureVector&)> fn) : fn_(std::move(fn)) {}
  Label query(const FeatureVector& q) override {
    queries.push_back(q);
    return fn_(q);
  }
  std::vector<FeatureVector> queries;

 private:
  std::function<Label(const FeatureVector&)> fn_;
};

struct QueryRecord {
  std::size_t n = 0;  ///< 0 for the probe
  std::size_t l0_from_original = 0;
  Label oracle_label = Label::benign;
  bool attack_detected = false;
};

/// Forwards queries to a defended oracle and keeps the oracle-side record.
class QueryChannel final : public LabelOracle {
 public:
  QueryChannel(Oracle& oracle, FeatureVector original) : oracle_(oracle), original_(std::move(original)) {}
  Label query(const FeatureVector& q) override;
  const std::vector<QueryRecord>& records() const noexcept { return records_; }

 private:
  Oracle& oracle_;
  FeatureVector original_;
  std::vector<QueryRecord> records_;
};

/// The query loop shared by all three strategies: probe X; while the label is
/// malware and n < n_max and n < pool size, add pool[n], add a random subset
/// of pool features of random size (up to the whole pool, or up to m when
/// adaptive), adaptively strip a fraction p of the removable enabled
/// features, restore invalid changes, and query.
AttackResult run_attack(LabelOracle& oracle, const FeatureVector& x, const BenignFeaturePool& pool,
                        const AttackConfig& config, const FeatureFamilyTable& table);

AttackResult run_blackbox(LabelOracle& oracle, const FeatureVector& x, const BenignFeaturePool& pool,
                          std::size_t n_max, const FeatureFamilyTable& table, std::uint64_t seed);
AttackResult run_graybox(LabelOracle& oracle, const FeatureVector& x, const BenignFeaturePool& pool,
                         std::size_t n_max, const FeatureFamilyTable& table, std::uint64_t seed);
AttackResult run_adaptive(LabelOracle& oracle, const FeatureVector& x, const BenignFeaturePool& pool,
                          std::size_t n_max, std::size_t m, double p, const FeatureFamilyTable& table,
                          std::uint64_t seed);

/// One attack session against a defended oracle: starts a session, runs the
/// attack through a QueryChannel and fills in the detection trace. Writes a
/// JSON-lines trace when `trace` is given.
AttackResult attack_oracle(Oracle& oracle, const FeatureVector& x, const BenignFeaturePool& pool,
                           const AttackConfig& config, const FeatureFamilyTable& table,
                           std::ostream* trace = nullptr);

}  // namespace malprotect
