// Command-line driver: data generation, training, calibration and the
// evasion, traffic-mix, cost and importance experiments.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <new>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "malprotect/bench.hpp"
#include "malprotect/config.hpp"
#include "malprotect/dataset_io.hpp"
#include "malprotect/errors.hpp"
#include "malprotect/experiments.hpp"
#include "malprotect/importance.hpp"
#include "malprotect/pipeline.hpp"

namespace fs = std::filesystem;
using namespace malprotect;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfigError = 2, kMissingArtifact = 3, kResourceError = 4 };

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out;
};

ExperimentConfig resolve_config(const Globals& g) {
  ExperimentConfig c = g.config_path.empty() || g.config_path == "default" ? ExperimentConfig{} : load_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  if (!g.out.empty()) c.output_dir = g.out;
  c.validate();
  return c;
}

void write_manifest(const ExperimentConfig& c, const std::string& command, const json& outputs) {
  json m{{"command", command},
         {"version", MALPROTECT_VERSION},
         {"config_hash", hex64(config_hash(c))},
         {"seed", c.seed},
         {"config", config_to_json(c)},
         {"outputs", outputs}};
  write_json_file(fs::path(c.output_dir) / ("manifest_" + command + ".json"), m);
}

void say(const std::string& msg) { std::cerr << msg << '\n'; }

std::string fmt(double v) { return format_real(v, 4); }

void cmd_gen_data(const ExperimentConfig& c) {
  auto [dataset, table] = generate_data(c);
  save_data(c.output_dir, dataset, table);
  say("wrote " + std::to_string(dataset.samples.size()) + " samples to " + (fs::path(c.output_dir) / "data").string());
  write_manifest(c, "gen-data", {"data/dataset.header.json", "data/dataset.jsonl"});
}

void cmd_calibrate(const ExperimentConfig& c) {
  auto [dataset, table] = load_data(c.output_dir);
  const auto d = calibrate_defenses(c, dataset);
  save_calibration(c.output_dir, d);
  say("avgDistD=" + fmt(d.calibration.stats.avg_dist) + " avgSharedD=" + fmt(d.calibration.stats.avg_shared) +
      " avgFeaturesD=" + fmt(d.calibration.stats.avg_features) + " maxRecLossD=" + format_real(d.calibration.max_rec_loss, 6) +
      " sd_threshold=" + fmt(d.sd.threshold));
  write_manifest(c, "calibrate", {"defense/calibration.json", "defense/autoencoder.json", "defense/sd_threshold.json"});
}

void cmd_train(const ExperimentConfig& c, const std::string& stage) {
  auto [dataset, table] = load_data(c.output_dir);
  json outputs = json::array();
  ModelSet models;
  if (stage == "models" || stage == "all") {
    models = train_models(c, dataset, table);
    save_models(c.output_dir, models);
    for (const auto& [name, m] : models.models) {
      say(name + " test accuracy " + fmt(accuracy(*m, dataset.subset(Split::test))));
      outputs.push_back("models/" + name + ".json");
    }
    say("transfer pools: " + std::to_string(models.training_pool.size()) + " train, " +
        std::to_string(models.test_pool.size()) + " test");
  } else {
    models = load_models(c.output_dir);
  }
  if (stage == "all") {
    save_calibration(c.output_dir, calibrate_defenses(c, dataset));
    outputs.push_back("defense/calibration.json");
  }
  if (stage == "decision" || stage == "all") {
    DefenseSet d = load_calibration(c.output_dir);
    train_decision_models(c, dataset, table, models, d);
    save_decision(c.output_dir, d);
    say("decision rows " + std::to_string(d.decision_rows.size()) + ", validation accuracy LR " +
        fmt(d.decision_lr->meta().validation_accuracy) + " NN " + fmt(d.decision_nn->meta().validation_accuracy));
    outputs.push_back("defense/decision_dataset.csv");
    outputs.push_back("defense/decision_lr.json");
    outputs.push_back("defense/decision_nn.json");
  }
  write_manifest(c, "train-" + stage, outputs);
}

struct AttackOptions {
  std::string defense = "malprotect-lr";
  std::string model = "mlp";
  std::optional<std::size_t> n_max;
  std::optional<std::string> strategy;
  std::optional<std::size_t> m;
  std::optional<double> p;
  std::optional<std::size_t> samples;
  std::string trace;
};

void cmd_attack(ExperimentConfig c, const AttackOptions& o) {
  if (o.strategy) c.attack = attack_strategy_from_string(*o.strategy);
  if (o.m) c.adaptive_m = *o.m;
  if (o.p) c.adaptive_p = *o.p;
  if (o.samples) c.n_attack_samples = *o.samples;
  c.defenses = {o.defense};
  c.models = {o.model};
  if (o.n_max) c.n_max_grid = {*o.n_max};
  c.validate();
  const Artifacts a = load_all(c.output_dir, c);
  const auto samples = attack_samples(a.dataset, a.models.at(o.model), c.n_attack_samples);

  std::vector<EvasionCell> cells;
  for (auto n_max : c.n_max_grid)
    for (auto seed : c.seeds) {
      cells.push_back(run_evasion_cell(a, c, o.defense, o.model, {c.attack, n_max, c.adaptive_m, c.adaptive_p, seed}, samples));
      const auto& cell = cells.back();
      say(o.defense + "/" + o.model + " n_max=" + std::to_string(n_max) + " seed=" + std::to_string(seed) +
          " evasion=" + fmt(cell.evasion_rate) + " median_detection=" + format_real(cell.median_detection_queries, 1));
    }
  if (!o.trace.empty()) {
    // Trace of the first sample under the first grid cell, replayed on a fresh oracle.
    std::ofstream trace(o.trace);
    if (!trace) throw ArtifactError("cannot write " + o.trace);
    auto oracle = make_oracle(o.defense, o.model, a, c);
    init_history(*oracle, a.dataset.vectors(Split::train), c.n_init, c.seeds.front());
    const auto pool = build_pool(a.dataset, c.attack == AttackStrategy::blackbox ? PoolMode::random : PoolMode::frequency,
                                 c.seeds.front());
    if (!samples.empty())
      attack_oracle(*oracle, samples.front(), pool,
                    {c.attack, c.n_max_grid.front(), c.adaptive_m, c.adaptive_p, attack_seed(c.seeds.front(), 0)},
                    a.table, &trace);
  }
  const fs::path csv = fs::path(c.output_dir) / "attack.csv";
  write_sweep_csv(csv, cells);
  write_manifest(c, "attack", {"attack.csv"});
}

void cmd_sweep(const ExperimentConfig& c) {
  const Artifacts a = load_all(c.output_dir, c);
  const auto cells = run_evasion_sweep(a, c);
  write_sweep_csv(fs::path(c.output_dir) / "sweep.csv", cells);
  json outputs{"sweep.csv"};
  for (const auto& defense : c.defenses)
    for (const auto& model : c.models) {
      std::vector<EvasionCell> pair;
      for (const auto& cell : cells)
        if (cell.defense == defense && cell.model == model) pair.push_back(cell);
      const std::string name = "sweep_" + defense + "_" + model + ".csv";
      write_sweep_csv(fs::path(c.output_dir) / name, pair);
      outputs.push_back(name);
    }
  say("sweep: " + std::to_string(cells.size()) + " cells");
  write_manifest(c, "sweep", outputs);
}

void cmd_mix(const ExperimentConfig& c) {
  const Artifacts a = load_all(c.output_dir, c);
  const auto cells = run_traffic_sweep(a, c);
  write_mix_csv(fs::path(c.output_dir) / "mix.csv", cells);
  say("mix: " + std::to_string(cells.size()) + " cells");
  write_manifest(c, "mix", {"mix.csv"});
}

void cmd_bench(const ExperimentConfig& c) {
  const Artifacts a = load_all(c.output_dir, c);
  std::vector<TimingReport> reports;
  json fits = json::object();
  for (const auto& defense : c.defenses) {
    if (defense == "none") continue;
    reports.push_back(bench_costs(a, c, defense, c.q_grid));
    const auto& r = reports.back();
    fits[defense] = {{"time_slope", r.time_fit.slope}, {"time_r2", r.time_fit.r2},
                     {"bytes_slope", r.bytes_fit.slope}, {"bytes_r2", r.bytes_fit.r2}};
    say(defense + " time R^2 " + fmt(r.time_fit.r2) + ", bytes/query " + fmt(r.bytes_fit.slope));
  }
  write_bench_csv(fs::path(c.output_dir) / "bench.csv", reports);
  write_manifest(c, "bench", {"bench.csv", {"fits", fits}});
}

void cmd_importance(const ExperimentConfig& c) {
  const Artifacts a = load_all(c.output_dir, c);
  const auto lr = feature_importance(*a.defenses.decision_lr, a.defenses.decision_rows, c.seed);
  const auto nn = feature_importance(*a.defenses.decision_nn, a.defenses.decision_rows, c.seed);
  const fs::path path = fs::path(c.output_dir) / "importance.csv";
  std::ofstream out(path);
  if (!out) throw ArtifactError("cannot write " + path.string());
  out << "indicator,logistic,mlp\n";
  for (std::size_t j = 0; j < kIndicatorCount; ++j)
    out << kIndicatorNames[j] << ',' << format_real(lr[j]) << ',' << format_real(nn[j]) << '\n';
  write_manifest(c, "importance", {"importance.csv"});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MalProtect: stateful defense against query attacks on malware classifiers"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Run seed (overrides the config)");
  app.add_option("--config", g.config_path, "Experiment config JSON, or 'default'");
  app.add_option("--out", g.out, "Artifact and output directory (overrides the config)");

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic dataset");
  std::string stage = "all";
  auto* train = app.add_subcommand("train", "Train prediction models and/or decision models");
  train->add_option("--stage", stage, "models | decision | all")->check(CLI::IsMember({"models", "decision", "all"}));
  auto* calib = app.add_subcommand("calibrate", "Dataset statistics, autoencoder and SD threshold");
  AttackOptions ao;
  auto* attack = app.add_subcommand("attack", "Attack one defense/model pair");
  attack->add_option("--defense", ao.defense, "Defense")->check(CLI::IsMember(kDefenses));
  attack->add_option("--model", ao.model, "Prediction model")->check(CLI::IsMember(kModels));
  attack->add_option("--n-max", ao.n_max, "Query budget");
  attack->add_option("--strategy", ao.strategy, "blackbox | graybox | adaptive");
  attack->add_option("--m", ao.m, "Adaptive bulk-add cap");
  attack->add_option("--p", ao.p, "Adaptive removal fraction");
  attack->add_option("--samples", ao.samples, "Number of malware samples");
  attack->add_option("--trace", ao.trace, "JSON-lines trace of the first attack");
  auto* sweep = app.add_subcommand("sweep", "Evasion rate over the n_max grid for every defense/model pair");
  auto* mix = app.add_subcommand("mix", "Traffic-mix metrics over the k grid");
  auto* bench = app.add_subcommand("bench", "Worst-case prediction time and storage over the history-size grid");
  auto* importance = app.add_subcommand("importance", "Indicator importance for both decision models");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  if (*seed_opt) g.seed = seed_value;

  try {
    const ExperimentConfig c = resolve_config(g);
    if (gen->parsed()) cmd_gen_data(c);
    else if (train->parsed()) cmd_train(c, stage);
    else if (calib->parsed()) cmd_calibrate(c);
    else if (attack->parsed()) cmd_attack(c, ao);
    else if (sweep->parsed()) cmd_sweep(c);
    else if (mix->parsed()) cmd_mix(c);
    else if (bench->parsed()) cmd_bench(c);
    else if (importance->parsed()) cmd_importance(c);
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ArtifactError& e) {
    std::cerr << "artifact error: " << e.what() << '\n';
    return kMissingArtifact;
  } catch (const ResourceError& e) {
    std::cerr << "resource error: " << e.what() << '\n';
    return kResourceError;
  } catch (const std::bad_alloc&) {
    std::cerr << "resource error: out of memory\n";
    return kResourceError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
