#include <memory>
#include <sstream>

#include "doctest.h"
#include "malprotect/attacks.hpp"
#include "malprotect/baselines.hpp"
#include "malprotect/errors.hpp"
#include "malprotect/synthetic.hpp"
#include "malprotect/training.hpp"
#include "test_support.hpp"

using namespace malprotect;
using testsupport::bits_of;
using testsupport::random_vector;

namespace {

// Bitwise legality check written against the table alone: every flipped bit
// must be an allowed addition or an allowed removal.
bool legal_from(const FeatureVector& x, const FeatureVector& q, const FeatureFamilyTable& table) {
  const auto a = bits_of(x);
  const auto b = bits_of(q);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto f = static_cast<FeatureIndex>(i);
    if (!a[i] && b[i] && !table.can_add(f)) return false;
    if (a[i] && !b[i] && !table.can_remove(f)) return false;
  }
  return true;
}

std::vector<FeatureVector> benign_donors(std::size_t dim, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<FeatureVector> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_vector(rng, dim, 0.3));
  return out;
}

Label constant_malware(const FeatureVector&) { return Label::malware; }

FunctionOracle count_threshold(std::size_t t) {
  return FunctionOracle([t](const FeatureVector& q) { return q.enabled_count() >= t ? Label::benign : Label::malware; });
}

std::shared_ptr<const PredictionModel> always(Label l, std::size_t dim) {
  Mlp<double> net({dim, 2}, OutputKind::softmax);
  net.layers()[0].bias(to_int(l)) = 5;
  return std::make_shared<MlpClassifier>(std::move(net), TrainingMeta{});
}

}  // namespace

TEST_CASE("pool frequency ordering from a hand-built benign split") {
  const std::size_t dim = 10;
  std::vector<FeatureVector> benign{FeatureVector(dim, {3, 7}), FeatureVector(dim, {3, 7}), FeatureVector(dim, {3}),
                                    FeatureVector(dim, {3, 1})};
  const auto pool = build_pool(benign, dim, PoolMode::frequency, 0);
  REQUIRE(pool.size() == dim);
  CHECK(pool.ordering[0] == 3);
  CHECK(pool.ordering[1] == 7);
  CHECK(pool.ordering[2] == 1);
  CHECK(pool.frequencies[3] == 4);
  CHECK(pool.frequencies[7] == 2);
  // zero-frequency features last, ties by index
  const std::vector<FeatureIndex> tail{0, 2, 4, 5, 6, 8, 9};
  CHECK(std::vector<FeatureIndex>(pool.ordering.begin() + 3, pool.ordering.end()) == tail);
}

TEST_CASE("random pool is a seeded permutation") {
  const auto donors = benign_donors(64, 20, 1);
  const auto a = build_pool(donors, 64, PoolMode::random, 9);
  const auto b = build_pool(donors, 64, PoolMode::random, 9);
  const auto c = build_pool(donors, 64, PoolMode::random, 10);
  CHECK(a.ordering == b.ordering);
  CHECK(a.ordering != c.ordering);
  auto sorted = a.ordering;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
}

TEST_CASE("pool construction errors and the dataset overload") {
  CHECK_THROWS_AS(build_pool(std::vector<FeatureVector>{}, 5, PoolMode::random, 0), ConfigError);
  const std::vector<FeatureVector> wrong{FeatureVector(6, {1})};
  CHECK_THROWS_AS(build_pool(wrong, 5, PoolMode::random, 0), DimensionMismatch);

  SyntheticConfig cfg;
  cfg.dim = 64;
  cfg.n_per_class = 100;
  const auto [d, table] = generate_synthetic_dataset(cfg, 2);
  const auto pool = build_pool(d, PoolMode::frequency, 0);
  std::vector<std::size_t> ref(d.dim, 0);
  for (const auto& s : d.samples)
    if (s.split == Split::train && s.label == Label::benign)
      for (auto i : s.vector.enabled()) ++ref[i];
  CHECK(pool.frequencies == ref);
}

TEST_CASE("strategy names and config validation") {
  CHECK(attack_strategy_from_string("gray-box") == AttackStrategy::graybox);
  CHECK(attack_strategy_from_string(to_string(AttackStrategy::adaptive)) == AttackStrategy::adaptive);
  CHECK_THROWS_AS(attack_strategy_from_string("whitebox"), ConfigError);

  AttackConfig c;
  c.n_max = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {AttackStrategy::adaptive, 10, 0, 0.1, 0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {AttackStrategy::adaptive, 10, 5, 1.5, 0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {AttackStrategy::adaptive, 10, 5, -0.1, 0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {AttackStrategy::blackbox, 10, 0, 7, 0};  // m, p ignored outside adaptive
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("attack entry points reject mismatched pools and tables") {
  const std::size_t dim = 16;
  const auto donors = benign_donors(dim, 10, 3);
  const auto rnd = build_pool(donors, dim, PoolMode::random, 1);
  const auto freq = build_pool(donors, dim, PoolMode::frequency, 1);
  const auto table = FeatureFamilyTable::permissive(dim);
  const FeatureVector x(dim, {0});
  FunctionOracle o(constant_malware);
  CHECK_THROWS_AS(run_blackbox(o, x, freq, 5, table, 0), ConfigError);
  CHECK_THROWS_AS(run_graybox(o, x, rnd, 5, table, 0), ConfigError);
  CHECK_THROWS_AS(run_adaptive(o, x, rnd, 5, 3, 0.1, table, 0), ConfigError);
  CHECK_THROWS_AS(run_graybox(o, x, freq, 5, FeatureFamilyTable::permissive(dim + 1), 0), DimensionMismatch);
  CHECK_THROWS_AS(run_graybox(o, x, freq, 0, table, 0), ConfigError);
  CHECK(o.queries.empty());
}

TEST_CASE("constant malware oracle exhausts the loop") {
  const std::size_t dim = 40;
  const auto donors = benign_donors(dim, 10, 4);
  const auto table = FeatureFamilyTable::permissive(dim);
  const FeatureVector x(dim, {1, 2});
  for (std::size_t n_max : {1u, 7u, 40u, 100u}) {
    FunctionOracle o(constant_malware);
    const auto r = run_blackbox(o, x, build_pool(donors, dim, PoolMode::random, 2), n_max, table, 5);
    CHECK(r.outcome == AttackOutcome::failure);
    CHECK(r.queries_used == std::min<std::size_t>(n_max, dim));
    CHECK(o.queries.size() == r.queries_used + 1);  // plus the probe
    CHECK(o.queries.front() == x);
  }
}

TEST_CASE("a sample already labelled benign is excluded") {
  const std::size_t dim = 20;
  const auto pool = build_pool(benign_donors(dim, 5, 1), dim, PoolMode::frequency, 0);
  FunctionOracle o([](const FeatureVector&) { return Label::benign; });
  const FeatureVector x(dim, {4});
  const auto r = run_graybox(o, x, pool, 50, FeatureFamilyTable::permissive(dim), 0);
  CHECK(r.outcome == AttackOutcome::excluded);
  CHECK(r.queries_used == 1);
  CHECK(r.final_vector == x);
  CHECK(o.queries.size() == 1);
}

TEST_CASE("toy oracle keyed on the leading pool feature") {
  const std::size_t dim = 50;
  const auto donors = benign_donors(dim, 30, 6);
  const auto table = FeatureFamilyTable::permissive(dim);
  const FeatureVector x(dim, {0, 1});

  const auto freq = build_pool(donors, dim, PoolMode::frequency, 0);
  const FeatureIndex top = freq.ordering[0];
  auto keyed = [](FeatureIndex f) {
    return FunctionOracle([f](const FeatureVector& q) { return q.test(f) ? Label::benign : Label::malware; });
  };
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto o = keyed(top);
    const auto r = run_graybox(o, x, freq, 100, table, seed);
    CHECK(r.outcome == AttackOutcome::success);
    CHECK(r.queries_used <= 2);
  }

  // black-box: f third in the random order, so success by query 3
  const auto rnd = build_pool(donors, dim, PoolMode::random, 8);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto o = keyed(rnd.ordering[2]);
    const auto r = run_blackbox(o, x, rnd, 100, table, seed);
    CHECK(r.outcome == AttackOutcome::success);
    CHECK(r.queries_used <= 3);
    CHECK(r.final_vector.test(rnd.ordering[2]));
  }
}

TEST_CASE("every emitted query respects the family table") {
  SyntheticConfig cfg;
  cfg.dim = 96;
  cfg.n_per_class = 60;
  const auto [d, table] = generate_synthetic_dataset(cfg, 5);
  const auto malware = d.vectors(Split::test, Label::malware);
  const auto rnd = build_pool(d, PoolMode::random, 1);
  const auto freq = build_pool(d, PoolMode::frequency, 1);
  std::size_t checked = 0;
  for (std::size_t s = 0; s < 6; ++s) {
    const auto& x = malware[s];
    const std::size_t t = x.enabled_count() + 30;  // needs real additions to succeed
    for (int strat = 0; strat < 4; ++strat) {
      auto o = count_threshold(t);
      AttackResult r;
      if (strat == 0) r = run_blackbox(o, x, rnd, 200, table, s);
      if (strat == 1) r = run_graybox(o, x, freq, 200, table, s);
      if (strat == 2) r = run_adaptive(o, x, freq, 200, 10, 0.3, table, s);
      if (strat == 3) r = run_adaptive(o, x, freq, 200, 4, 1.0, table, s);
      for (const auto& q : o.queries) {
        CHECK(legal_from(x, q, table));
        ++checked;
      }
      CHECK(legal_from(x, r.final_vector, table));
      CHECK(r.queries_used <= 200);
      CHECK(r.queries_used <= rnd.size());
      if (r.outcome == AttackOutcome::success) {
        CHECK(o.queries.back() == r.final_vector);
        CHECK(r.final_vector.enabled_count() >= t);
      }
    }
  }
  CHECK(checked > 24);
}

TEST_CASE("attacks are deterministic for a seed") {
  const std::size_t dim = 80;
  const auto donors = benign_donors(dim, 20, 2);
  const auto table = FeatureFamilyTable::round_robin(dim, 8);
  const auto freq = build_pool(donors, dim, PoolMode::frequency, 0);
  const FeatureVector x(dim, {1, 9, 17, 33});
  for (const AttackConfig c : {AttackConfig{AttackStrategy::graybox, 60, 1, 0, 3},
                               AttackConfig{AttackStrategy::adaptive, 60, 6, 0.2, 3}}) {
    auto o1 = count_threshold(30);
    auto o2 = count_threshold(30);
    const auto a = run_attack(o1, x, freq, c, table);
    const auto b = run_attack(o2, x, freq, c, table);
    CHECK(a.outcome == b.outcome);
    CHECK(a.queries_used == b.queries_used);
    CHECK(a.final_vector == b.final_vector);
    CHECK(o1.queries == o2.queries);
    auto o3 = count_threshold(30);
    auto c2 = c;
    c2.seed = 4;
    run_attack(o3, x, freq, c2, table);
    CHECK(o3.queries != o1.queries);
  }
}

TEST_CASE("adaptive with p = 0 and an uncapped m matches gray-box") {
  const std::size_t dim = 60;
  const auto donors = benign_donors(dim, 20, 7);
  const auto table = FeatureFamilyTable::round_robin(dim, 6);
  const auto freq = build_pool(donors, dim, PoolMode::frequency, 0);
  const FeatureVector x(dim, {2, 3, 5});
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto o1 = count_threshold(45);
    auto o2 = count_threshold(45);
    run_graybox(o1, x, freq, 40, table, seed);
    run_adaptive(o2, x, freq, 40, dim, 0.0, table, seed);
    CHECK(o1.queries == o2.queries);
  }
}

TEST_CASE("adaptive bulk additions never exceed m") {
  const std::size_t dim = 200;
  const auto donors = benign_donors(dim, 20, 7);
  const auto table = FeatureFamilyTable::permissive(dim);
  const auto freq = build_pool(donors, dim, PoolMode::frequency, 0);
  const FeatureVector x(dim, {});
  FunctionOracle o(constant_malware);
  run_adaptive(o, x, freq, 30, 5, 0.0, table, 1);
  for (std::size_t i = 1; i < o.queries.size(); ++i) {
    // anchor plus at most m bulk features per iteration
    CHECK(o.queries[i].enabled_count() <= o.queries[i - 1].enabled_count() + 6);
    CHECK(o.queries[i].test(freq.ordering[i - 1]));
  }
}

TEST_CASE("adaptive p = 1 strips every removable feature") {
  // dim 8: even features add+remove, odd features add-only
  const std::size_t dim = 8;
  std::vector<FamilyId> fam(dim);
  for (std::size_t i = 0; i < dim; ++i) fam[i] = FamilyId(i % 2);
  const FeatureFamilyTable table(fam, {Permission{true, true}, Permission{true, false}});
  const std::vector<FeatureVector> donors{FeatureVector(dim, {0, 1, 2, 3, 4, 5, 6, 7})};
  const auto freq = build_pool(donors, dim, PoolMode::frequency, 0);
  const FeatureVector x(dim, {0, 1, 4});
  FunctionOracle o(constant_malware);
  const auto r = run_adaptive(o, x, freq, 8, 3, 1.0, table, 2);
  CHECK(r.queries_used == 8);
  for (std::size_t i = 1; i < o.queries.size(); ++i) {
    const auto b = bits_of(o.queries[i]);
    for (std::size_t f = 0; f < dim; f += 2) CHECK(b[f] == 0);
    CHECK(b[1] == 1);  // original add-only feature kept
  }
  // all odd features get added by the anchor sequence eventually
  CHECK(r.final_vector == FeatureVector(dim, {1, 3, 5, 7}));
}

TEST_CASE("black-box success is monotone in n_max") {
  const std::size_t dim = 120;
  const auto donors = benign_donors(dim, 20, 9);
  const auto table = FeatureFamilyTable::round_robin(dim, 8);
  const FeatureVector x(dim, {3, 10, 50});
  std::vector<std::size_t> successes;
  for (std::size_t n_max : {1u, 2u, 4u, 8u, 16u, 64u}) {
    std::size_t s = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      auto o = count_threshold(70);
      const auto pool = build_pool(donors, dim, PoolMode::random, seed);
      s += run_blackbox(o, x, pool, n_max, table, seed).outcome == AttackOutcome::success;
    }
    successes.push_back(s);
  }
  for (std::size_t i = 1; i < successes.size(); ++i) CHECK(successes[i] >= successes[i - 1]);
  CHECK(successes.back() > successes.front());
}

TEST_CASE("attack_oracle records detections from the oracle side") {
  const std::size_t dim = 64;
  const auto donors = benign_donors(dim, 20, 1);
  const auto freq = build_pool(donors, dim, PoolMode::frequency, 0);
  const auto table = FeatureFamilyTable::permissive(dim);
  const FeatureVector x(dim, {1, 2, 3});

  // malware model plus an L0 detector: the perturbation chain stays close
  L0Oracle oracle(always(Label::malware, dim), dim, 64);
  std::ostringstream trace;
  const AttackConfig c{AttackStrategy::adaptive, 25, 2, 0, 1};
  const auto r = attack_oracle(oracle, x, freq, c, table, &trace);
  CHECK(r.outcome == AttackOutcome::failure);
  CHECK(r.detection_trace.size() == r.queries_used);
  REQUIRE(r.first_detection().has_value());
  CHECK(*r.first_detection() == 1);

  std::istringstream in(trace.str());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["n"] == lines);
    if (lines == 0) CHECK(j["l0_from_original"] == 0);
    ++lines;
  }
  CHECK(lines == r.queries_used + 1);
  CHECK(oracle.history().size() == r.queries_used + 1);

  AttackResult empty;
  CHECK_FALSE(empty.first_detection().has_value());
  CHECK(to_string(AttackOutcome::excluded) == "excluded");
}

TEST_CASE("gray-box keeps pace with black-box on trained networks") {
  // Pooled over several training seeds: on this data a network either yields
  // to bulk additions almost always or almost never, depending on its seed.
  const auto [d, table] = generate_synthetic_dataset(SyntheticConfig{}, 3);
  const auto malware = d.vectors(Split::test, Label::malware);
  const auto rnd = build_pool(d, PoolMode::random, 3);
  const auto freq = build_pool(d, PoolMode::frequency, 3);
  std::size_t bb = 0, gb = 0, counted = 0;
  for (std::uint64_t model_seed = 1; model_seed <= 4; ++model_seed) {
    const auto model = train_mlp(d, kDefaultHidden, TrainingParams{}, model_seed);
    for (std::size_t s = 0; s < 25; ++s) {
      FunctionOracle o1([&](const FeatureVector& q) { return model.predict_label(q); });
      FunctionOracle o2([&](const FeatureVector& q) { return model.predict_label(q); });
      const auto a = run_blackbox(o1, malware[s], rnd, 500, table, s);
      const auto b = run_graybox(o2, malware[s], freq, 500, table, s);
      CHECK((a.outcome == AttackOutcome::excluded) == (b.outcome == AttackOutcome::excluded));
      if (a.outcome == AttackOutcome::excluded) continue;
      ++counted;
      bb += a.outcome == AttackOutcome::success;
      gb += b.outcome == AttackOutcome::success;
    }
  }
  REQUIRE(counted > 0);
  const double rb = double(bb) / double(counted), rg = double(gb) / double(counted);
  MESSAGE("black-box " << rb << " gray-box " << rg);
  CHECK(rg >= rb - 0.10);
}
