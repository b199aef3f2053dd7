#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "malprotect/bench.hpp"
#include "malprotect/config.hpp"
#include "malprotect/dataset_io.hpp"
#include "malprotect/errors.hpp"
#include "malprotect/experiments.hpp"
#include "malprotect/pipeline.hpp"
#include "test_support.hpp"

using namespace malprotect;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.data.dim = 96;
  c.data.n_per_class = 300;
  c.hidden = {16};
  c.substitute_hidden = {16};
  c.ensemble_hidden = {{16}, {12}, {8}};
  c.model_training.epochs = 8;
  c.autoencoder_training.epochs = 5;
  c.decision_training_logistic.epochs = 50;
  c.decision_training_mlp.epochs = 20;
  c.transfer_rounds = 10;
  c.pair_budget = 5000;
  c.decision_sim.n_init = 60;
  c.decision_sim.n_legit_sessions = 6;
  c.decision_sim.n_attack_sessions = 12;
  c.decision_sim.min_rows = 300;
  c.n_init = 60;
  c.history_capacity = 2000;
  c.sd_k = 10;
  c.n_attack_samples = 20;
  c.seeds = {1, 2};
  c.n_max_grid = {20, 60};
  c.k_grid = {0.5};
  c.q_grid = {200, 400};
  return c;
}

const Artifacts& tiny_artifacts() {
  static const Artifacts a = build_all(tiny_config());
  return a;
}

std::shared_ptr<const PredictionModel> always(Label l, std::size_t dim) {
  Mlp<double> net({dim, 2}, OutputKind::softmax);
  net.layers()[0].bias(to_int(l)) = 5;
  return std::make_shared<MlpClassifier>(std::move(net), TrainingMeta{});
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MALPROTECT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("confusion identities on a hand example") {
  Confusion c;
  const std::vector<std::pair<Label, Label>> pairs{
      {Label::malware, Label::malware}, {Label::malware, Label::malware}, {Label::malware, Label::malware},
      {Label::benign, Label::malware},  {Label::benign, Label::benign},   {Label::benign, Label::benign},
      {Label::benign, Label::benign},   {Label::benign, Label::benign},   {Label::malware, Label::benign},
      {Label::malware, Label::benign}};
  for (auto [t, p] : pairs) c.add(t, p);
  CHECK(c.tp == 3);
  CHECK(c.fp == 1);
  CHECK(c.tn == 4);
  CHECK(c.fn == 2);
  CHECK(accuracy(c) == doctest::Approx(0.7));
  CHECK(false_positive_rate(c) == doctest::Approx(0.2));
  CHECK(f1_score(c) == doctest::Approx(6.0 / 9.0));

  Confusion only_pos;
  only_pos.add(Label::malware, Label::benign);
  CHECK(false_positive_rate(only_pos) == 0.0);
  CHECK(f1_score(only_pos) == 0.0);
  CHECK(f1_score(Confusion{}) == 0.0);
}

TEST_CASE("rank AUC agrees with the pairwise reference") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + rng() % 999;
    std::vector<double> scores(n);
    std::vector<Label> truth(n);
    // coarse grid forces plenty of ties
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = (rng() & 1) ? Label::malware : Label::benign;
      scores[i] = double(rng() % 11) / 10.0 + (truth[i] == Label::malware ? 0.1 : 0.0);
    }
    truth[0] = Label::malware;
    truth[1] = Label::benign;
    double brute_hits = 0, pairs = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (truth[i] == Label::malware && truth[j] == Label::benign) {
          pairs += 1;
          brute_hits += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
        }
    CHECK(rank_auc(scores, truth) == doctest::Approx(brute_hits / pairs).epsilon(1e-12));
    CHECK(pairwise_auc(scores, truth) == doctest::Approx(brute_hits / pairs).epsilon(1e-12));
  }
}

TEST_CASE("AUC degenerate and error cases") {
  const std::vector<Label> truth{Label::malware, Label::benign, Label::malware, Label::benign};
  const std::vector<double> flat(4, 0.3);
  CHECK(rank_auc(flat, truth) == 0.5);
  const std::vector<double> perfect{1, 0, 0.9, 0.1};
  CHECK(rank_auc(perfect, truth) == 1.0);
  const std::vector<double> inverted{0, 1, 0.1, 0.9};
  CHECK(rank_auc(inverted, truth) == 0.0);
  const std::vector<Label> one_class(4, Label::benign);
  CHECK_THROWS_AS(rank_auc(flat, one_class), ConfigError);
  const std::vector<double> short_scores{1.0};
  CHECK_THROWS(rank_auc(short_scores, truth));
}

TEST_CASE("perfect oracle metrics") {
  const std::vector<Label> truth{Label::malware, Label::benign, Label::benign, Label::malware};
  const std::vector<double> scores{1, 0, 0, 1};
  const auto m = compute_metrics(truth, truth, scores);
  CHECK(m.accuracy == 1.0);
  CHECK(m.fpr == 0.0);
  CHECK(m.f1 == 1.0);
  CHECK(m.auc == 1.0);
  CHECK(m.counts.total() == 4);
}

TEST_CASE("small statistics helpers") {
  CHECK(median_or_minus_one({}) == -1);
  CHECK(median_or_minus_one({7}) == 7);
  CHECK(median_or_minus_one({9, 1, 4}) == 4);
  CHECK(median_or_minus_one({4, 1, 9, 2}) == 3);

  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  CHECK(mean_of(v) == 5.0);
  CHECK(stdev_of(v) == doctest::Approx(std::sqrt(32.0 / 7.0)));
  CHECK(stdev_of(std::vector<double>{3}) == 0.0);
  CHECK(mean_of(std::vector<double>{}) == 0.0);

  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> y{3, 5, 7, 9, 11};
  const auto fit = linear_fit(x, y);
  CHECK(fit.slope == doctest::Approx(2.0));
  CHECK(fit.intercept == doctest::Approx(1.0));
  CHECK(fit.r2 == doctest::Approx(1.0));
  const std::vector<double> noisy{3, 6, 6, 10, 10};
  const auto f2 = linear_fit(x, noisy);
  CHECK(f2.r2 < 1.0);
  CHECK(f2.r2 > 0.8);

  CHECK(format_real(0.5) == "0.500000");
  CHECK(format_real(-1, 1) == "-1.0");
  CHECK(format_real(2.0 / 3.0, 3) == "0.667");
}

TEST_CASE("traffic-mix counts") {
  auto c = mix_counts(1000, 0.5);
  CHECK(c.adversarial == 500);
  CHECK(c.benign == 250);
  CHECK(c.malware == 250);
  c = mix_counts(1000, 0.1);
  CHECK(c.adversarial == 100);
  CHECK(c.benign == 450);
  CHECK(c.malware == 450);
  c = mix_counts(1001, 0.3);
  CHECK(c.adversarial == 300);
  CHECK(c.benign + c.malware == 701);
  CHECK(c.malware - c.benign == 1);
}

TEST_CASE("init_history fills, repeats and rejects") {
  const std::size_t dim = 30;
  std::mt19937_64 rng(1);
  std::vector<FeatureVector> training;
  for (int i = 0; i < 40; ++i) training.push_back(testsupport::random_vector(rng, dim, 0.3));

  L0Oracle a(always(Label::benign, dim), dim, 10, 100);
  init_history(a, training, 0, 1);
  CHECK(a.history().empty());
  init_history(a, training, 25, 7);
  CHECK(a.history().size() == 25);
  // drawn without replacement while the pool lasts
  std::set<std::vector<FeatureIndex>> seen;
  for (const auto& e : a.history().entries()) seen.insert({e.vector.enabled().begin(), e.vector.enabled().end()});
  CHECK(seen.size() == 25);

  L0Oracle b(always(Label::benign, dim), dim, 10, 100);
  init_history(b, training, 25, 7);
  for (std::size_t i = 0; i < 25; ++i) CHECK(a.history().entries()[i].vector == b.history().entries()[i].vector);

  L0Oracle big(always(Label::benign, dim), dim, 10, 100);
  init_history(big, training, 100, 3);
  CHECK(big.history().size() == 100);

  CHECK_THROWS_AS(init_history(big, training, 101, 3), ConfigError);
  L0Oracle fresh(always(Label::benign, dim), dim, 10, 100);
  CHECK_THROWS_AS(init_history(fresh, std::vector<FeatureVector>{}, 5, 3), ConfigError);
}

TEST_CASE("attack seeds differ per sample and per run seed") {
  std::set<std::uint64_t> s;
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
    for (std::size_t i = 0; i < 200; ++i) s.insert(attack_seed(seed, i));
  CHECK(s.size() == 1000);
  CHECK(attack_seed(3, 4) == attack_seed(3, 4));
}

TEST_CASE("config JSON round trip and rejection") {
  const ExperimentConfig def;
  const auto back = config_from_json(config_to_json(def));
  CHECK(config_to_json(back) == config_to_json(def));
  CHECK(config_hash(back) == config_hash(def));

  auto tweaked = def;
  tweaked.seed = 2;
  CHECK(config_hash(tweaked) != config_hash(def));
  CHECK(hex64(0xabcULL) == "0000000000000abc");

  const auto partial = config_from_json(nlohmann::json{{"seed", 9}, {"data", {{"dim", 64}}}});
  CHECK(partial.seed == 9);
  CHECK(partial.data.dim == 64);
  CHECK(partial.data.n_per_class == def.data.n_per_class);

  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"sede", 1}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"data", {{"dimm", 3}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"seeds", nlohmann::json::array()}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"seed", "one"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"defenses", {"firewall"}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"q_grid", {300, 200}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"mix_queries", 999}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"n_init", 20000}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"data", 5}}), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("evasion cells on a tiny pipeline") {
  const auto& a = tiny_artifacts();
  const auto c = tiny_config();
  const auto samples = attack_samples(a.dataset, a.models.at("mlp"), c.n_attack_samples);
  REQUIRE(!samples.empty());
  for (const auto& s : samples) CHECK(a.models.at("mlp").predict_label(s) == Label::malware);

  // evasion never drops as the budget grows, seeds held fixed
  double prev = -1;
  for (std::size_t n_max : {5u, 20u, 80u}) {
    const auto cell = run_evasion_cell(a, c, "none", "mlp", {AttackStrategy::graybox, n_max, 20, 0, 1}, samples);
    CHECK(cell.successes + cell.failures + cell.excluded == samples.size());
    CHECK(cell.excluded == 0);
    CHECK(cell.evasion_rate >= prev);
    CHECK(cell.median_detection_queries == -1);
    prev = cell.evasion_rate;
    for (const auto& r : cell.results) CHECK(r.queries_used <= n_max);
  }

  const auto cell = run_evasion_cell(a, c, "l0", "mlp", {AttackStrategy::graybox, 40, 20, 0, 2}, samples);
  CHECK(cell.results.size() == samples.size());
  std::size_t detected = 0;
  for (const auto& r : cell.results) detected += r.first_detection().has_value();
  CHECK((detected == 0) == (cell.median_detection_queries == -1));
}

TEST_CASE("a decision model stuck on attack yields zero evasion") {
  const auto& a = tiny_artifacts();
  const auto c = tiny_config();
  MalProtectOracle oracle(a.models.shared("mlp"), a.defenses.calibration,
                          std::make_shared<DecisionModel>(DecisionModel::constant(true)), a.dataset.dim);
  const auto samples = attack_samples(a.dataset, a.models.at("mlp"), 10);
  const auto pool = build_pool(a.dataset, PoolMode::frequency, 1);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto r = attack_oracle(oracle, samples[i], pool, {AttackStrategy::graybox, 30, 20, 0, i}, a.table);
    CHECK(r.outcome == AttackOutcome::failure);
    CHECK(r.first_detection() == std::optional<std::size_t>(1));
  }
}

TEST_CASE("traffic mix composition and metric identities") {
  const auto& a = tiny_artifacts();
  auto c = tiny_config();
  const auto cell = run_traffic_mix(a, c, "malprotect-lr", "mlp", 0.5, 3);
  REQUIRE(cell.truth.size() == 1000);
  REQUIRE(cell.verdicts.size() == 1000);
  Confusion recount;
  std::vector<double> scores;
  std::vector<Label> predicted;
  std::size_t benign = 0;
  for (std::size_t i = 0; i < 1000; ++i) {
    recount.add(cell.truth[i], cell.verdicts[i].label);
    scores.push_back(cell.verdicts[i].internal_score);
    predicted.push_back(cell.verdicts[i].label);
    benign += cell.truth[i] == Label::benign;
    if (cell.verdicts[i].attack_detected) CHECK(cell.verdicts[i].internal_score == 1.0);
  }
  CHECK(benign == 250);
  CHECK(recount.tp == cell.metrics.counts.tp);
  CHECK(recount.fp == cell.metrics.counts.fp);
  CHECK(cell.metrics.accuracy == accuracy(recount));
  CHECK(cell.metrics.fpr == false_positive_rate(recount));
  CHECK(cell.metrics.auc == doctest::Approx(pairwise_auc(scores, cell.truth)).epsilon(1e-12));

  // same seed, same stream
  const auto again = run_traffic_mix(a, c, "malprotect-lr", "mlp", 0.5, 3);
  CHECK(again.truth == cell.truth);
  CHECK(again.metrics.auc == cell.metrics.auc);

  Artifacts empty_pool = a;
  empty_pool.models.test_pool.clear();
  CHECK_THROWS_AS(run_traffic_mix(empty_pool, c, "none", "mlp", 0.5, 3), ConfigError);
}

TEST_CASE("bench rows and CSV headers") {
  const auto& a = tiny_artifacts();
  auto c = tiny_config();
  const std::vector<std::size_t> grid{200, 400};
  const auto report = bench_costs(a, c, "malprotect-lr", grid);
  REQUIRE(report.rows.size() == 2);
  CHECK(report.rows[0].q_size == 200);
  CHECK(report.rows[1].bytes > report.rows[0].bytes);
  CHECK(report.rows[0].worst_case_seconds > 0);

  const auto dir = testsupport::scratch_dir(MALPROTECT_TEST_TMP, "csv");
  write_bench_csv(dir / "bench.csv", std::vector<TimingReport>{report});
  CHECK(slurp(dir / "bench.csv").rfind("defense,q_size,worst_case_seconds,bytes\n", 0) == 0);

  const auto samples = attack_samples(a.dataset, a.models.at("mlp"), 5);
  const std::vector<EvasionCell> cells{
      run_evasion_cell(a, c, "none", "mlp", {AttackStrategy::graybox, 10, 20, 0, 1}, samples)};
  write_sweep_csv(dir / "sweep.csv", cells);
  CHECK(slurp(dir / "sweep.csv").rfind("defense,model,n_max,seed,evasion_rate,median_detection_queries\nnone,mlp,10,1,",
                                      0) == 0);
  const std::vector<MixCell> mixes{run_traffic_mix(a, c, "none", "mlp", 0.5, 1)};
  write_mix_csv(dir / "mix.csv", mixes);
  CHECK(slurp(dir / "mix.csv").rfind("defense,model,k,seed,accuracy,fpr,f1,auc\n", 0) == 0);
}

TEST_CASE("artifacts survive a save and load cycle") {
  const auto& a = tiny_artifacts();
  const auto c = tiny_config();
  const auto dir = testsupport::scratch_dir(MALPROTECT_TEST_TMP, "artifacts");
  CHECK_THROWS_AS(load_all(dir, c), ArtifactError);
  save_data(dir, a.dataset, a.table);
  save_models(dir, a.models);
  save_calibration(dir, a.defenses);
  save_decision(dir, a.defenses);
  const auto b = load_all(dir, c);
  CHECK(b.dataset.samples.size() == a.dataset.samples.size());
  CHECK(b.table == a.table);
  CHECK(b.models.test_pool == a.models.test_pool);
  const auto& s = a.dataset.samples[0].vector;
  CHECK(b.models.at("veto").predict_label(s) == a.models.at("veto").predict_label(s));
  CHECK(b.defenses.sd.threshold == a.defenses.sd.threshold);
  CHECK_THROWS_AS(make_oracle("firewall", "mlp", b, c), ConfigError);
}

TEST_CASE("CLI exit codes") {
  const auto dir = testsupport::scratch_dir(MALPROTECT_TEST_TMP, "cli");
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("attack --defense firewall") == 2);
  CHECK(run_cli("--config /nonexistent.json gen-data") == 2);

  {
    std::ofstream bad(dir / "bad.json");
    bad << R"({"seed": 1, "colour": "blue"})";
  }
  CHECK(run_cli("--config " + (dir / "bad.json").string() + " gen-data") == 2);
  {
    std::ofstream broken(dir / "broken.json");
    broken << "{ not json";
  }
  CHECK(run_cli("--config " + (dir / "broken.json").string() + " gen-data") == 2);

  // nothing generated yet
  CHECK(run_cli("--out " + (dir / "empty").string() + " attack --defense none --model mlp") == 3);
  CHECK(run_cli("--out " + (dir / "empty").string() + " bench") == 3);
}

TEST_CASE("CLI pipeline on a tiny config writes manifests") {
  const auto dir = testsupport::scratch_dir(MALPROTECT_TEST_TMP, "cli_run");
  auto c = tiny_config();
  c.defenses = {"none", "malprotect-lr"};
  c.models = {"mlp"};
  c.output_dir = (dir / "out").string();
  {
    std::ofstream cfg(dir / "tiny.json");
    cfg << config_to_json(c).dump(2);
  }
  const std::string base = "--config " + (dir / "tiny.json").string() + " ";
  REQUIRE(run_cli(base + "gen-data") == 0);
  REQUIRE(run_cli(base + "calibrate") == 0);
  REQUIRE(run_cli(base + "train") == 0);
  REQUIRE(run_cli(base + "attack --defense malprotect-lr --model mlp --n-max 30 --samples 5") == 0);
  REQUIRE(run_cli(base + "sweep") == 0);
  const auto out = dir / "out";
  CHECK(fs::exists(out / "attack.csv"));
  CHECK(fs::exists(out / "sweep_none_mlp.csv"));
  CHECK(fs::exists(out / "sweep_malprotect-lr_mlp.csv"));
  const auto manifest = read_json_file(out / "manifest_sweep.json");
  CHECK(manifest["config_hash"] == hex64(config_hash(c)));
  CHECK(manifest["seed"] == 1);

  // one row per (n_max, seed) in each per-pair file
  std::ifstream rows(out / "sweep_none_mlp.csv");
  std::string line;
  std::size_t n = 0;
  while (std::getline(rows, line)) ++n;
  CHECK(n == 1 + c.n_max_grid.size() * c.seeds.size());
}
