#include "malprotect/pipeline.hpp"

#include <fstream>

#include "malprotect/autoencoder.hpp"
#include "malprotect/dataset_io.hpp"
#include "malprotect/dataset_stats.hpp"
#include "malprotect/decision_data.hpp"
#include "malprotect/errors.hpp"
#include "malprotect/model_io.hpp"
#include "malprotect/robustness.hpp"
#include "malprotect/synthetic.hpp"
#include "malprotect/training.hpp"
#include "malprotect/transfer.hpp"

namespace malprotect {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Independent streams per stage, all derived from the run seed.
enum : std::uint64_t {
  kDataStream = 1,
  kModelStream,
  kSubstituteStream,
  kAdversarialStream,
  kDistillStream,
  kMajorityStream,
  kVetoStream,
  kStatsStream,
  kAutoencoderStream,
  kDecisionDataStream,
  kDecisionLrStream,
  kDecisionNnStream,
};

std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void require(const fs::path& p) {
  if (!fs::exists(p)) throw ArtifactError("missing artifact: " + p.string());
}

void write_vectors(const fs::path& path, const std::vector<FeatureVector>& vectors) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ArtifactError("cannot write " + path.string());
  for (const auto& v : vectors)
    out << json{{"dim", v.dim()}, {"features", std::vector<FeatureIndex>(v.enabled().begin(), v.enabled().end())}}.dump()
        << '\n';
}

std::vector<FeatureVector> read_vectors(const fs::path& path) {
  require(path);
  std::ifstream in(path);
  std::vector<FeatureVector> out;
  std::string line;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = json::parse(line);
      out.emplace_back(j.at("dim").get<std::size_t>(), j.at("features").get<std::vector<FeatureIndex>>());
    }
  } catch (const json::exception& e) {
    throw ArtifactError("malformed vector file " + path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace

const PredictionModel& ModelSet::at(const std::string& name) const { return *shared(name); }

std::shared_ptr<const PredictionModel> ModelSet::shared(const std::string& name) const {
  const auto it = models.find(name);
  if (it == models.end()) throw ArtifactError("no trained model named '" + name + "'");
  return it->second;
}

std::pair<Dataset, FeatureFamilyTable> generate_data(const ExperimentConfig& config) {
  return generate_synthetic_dataset(config.data, stage_seed(config.seed, kDataStream));
}

ModelSet train_models(const ExperimentConfig& config, const Dataset& dataset, const FeatureFamilyTable& table) {
  ModelSet set;
  const auto& params = config.model_training;
  auto mlp = std::make_shared<MlpClassifier>(train_mlp(dataset, config.hidden, params, stage_seed(config.seed, kModelStream)));
  set.models["mlp"] = mlp;

  auto substitute = std::make_shared<MlpClassifier>(
      train_mlp(dataset, config.substitute_hidden, params, stage_seed(config.seed, kSubstituteStream)));
  substitute->set_kind("substitute");
  set.substitute = substitute;
  const auto train_malware = dataset.vectors(Split::train, Label::malware);
  const auto test_malware = dataset.vectors(Split::test, Label::malware);
  set.training_pool = transfer_vectors(
      transferability_generate(*substitute, train_malware, table, config.transfer_epsilon, config.transfer_rounds));
  set.test_pool = transfer_vectors(
      transferability_generate(*substitute, test_malware, table, config.transfer_epsilon, config.transfer_rounds));

  set.models["nn-at"] = std::make_shared<MlpClassifier>(adversarially_train(
      dataset, set.training_pool, config.adversarial_fraction, config.hidden, params,
      stage_seed(config.seed, kAdversarialStream)));
  set.models["nn-dd"] = std::make_shared<MlpClassifier>(
      distill(*mlp, dataset, config.distill_temperature, params, stage_seed(config.seed, kDistillStream)));
  set.models["majority"] = std::make_shared<EnsembleModel>(train_ensemble(
      dataset, VoteMode::majority, config.ensemble_hidden, params, stage_seed(config.seed, kMajorityStream)));
  set.models["veto"] = std::make_shared<EnsembleModel>(
      train_ensemble(dataset, VoteMode::veto, config.ensemble_hidden, params, stage_seed(config.seed, kVetoStream)));
  return set;
}

DefenseSet calibrate_defenses(const ExperimentConfig& config, const Dataset& dataset) {
  DefenseSet d;
  const auto training = dataset.vectors(Split::train);
  d.calibration.stats = compute_dataset_stats(training, config.pair_budget, stage_seed(config.seed, kStatsStream));
  const auto ae_data = config.autoencoder_benign_only ? dataset.vectors(Split::train, Label::benign) : training;
  auto ae = std::make_shared<Autoencoder>(train_autoencoder(ae_data, default_autoencoder_hidden(dataset.dim),
                                                            config.autoencoder_training,
                                                            stage_seed(config.seed, kAutoencoderStream)));
  d.calibration.max_rec_loss = max_reconstruction_loss(*ae, training);
  d.calibration.autoencoder = ae;
  d.calibration.min_history = config.min_history;
  d.calibration.clamp = config.clamp_scores;
  d.calibration.validate();
  d.sd = sd_calibrate(training, config.sd_k, config.sd_percentile);
  return d;
}

void train_decision_models(const ExperimentConfig& config, const Dataset& dataset, const FeatureFamilyTable& table,
                           const ModelSet& models, DefenseSet& defenses) {
  defenses.decision_rows = generate_decision_dataset(models.shared("mlp"), dataset, table, defenses.calibration,
                                                     config.decision_sim,
                                                     stage_seed(config.seed, kDecisionDataStream));
  defenses.decision_lr = std::make_shared<DecisionModel>(
      train_decision_model(defenses.decision_rows, DecisionKind::logistic, config.decision_training_logistic,
                           stage_seed(config.seed, kDecisionLrStream)));
  defenses.decision_nn = std::make_shared<DecisionModel>(train_decision_model(
      defenses.decision_rows, DecisionKind::mlp, config.decision_training_mlp, stage_seed(config.seed, kDecisionNnStream)));
}

Artifacts build_all(const ExperimentConfig& config) {
  Artifacts a;
  std::tie(a.dataset, a.table) = generate_data(config);
  a.models = train_models(config, a.dataset, a.table);
  a.defenses = calibrate_defenses(config, a.dataset);
  train_decision_models(config, a.dataset, a.table, a.models, a.defenses);
  return a;
}

std::unique_ptr<Oracle> make_oracle(const std::string& defense, const std::string& model, const Artifacts& artifacts,
                                    const ExperimentConfig& config) {
  auto m = artifacts.models.shared(model);
  const std::size_t dim = artifacts.dataset.dim;
  const auto cap = config.history_capacity;
  const auto& d = artifacts.defenses;
  if (defense == "none") return std::make_unique<BareOracle>(m, dim, cap);
  if (defense == "malprotect-lr" || defense == "malprotect-nn") {
    auto decision = defense == "malprotect-lr" ? d.decision_lr : d.decision_nn;
    if (!decision) throw ArtifactError("decision model for " + defense + " is not trained");
    return std::make_unique<MalProtectOracle>(m, d.calibration, decision, dim, cap, defense);
  }
  if (defense == "l0") return std::make_unique<L0Oracle>(m, dim, config.l0_threshold, cap);
  if (defense == "prada") return std::make_unique<PradaOracle>(m, dim, config.prada_delta, cap);
  if (defense == "sd") return std::make_unique<SdOracle>(m, dim, d.sd, cap);
  throw ConfigError("unknown defense '" + defense + "'");
}

void save_data(const fs::path& dir, const Dataset& dataset, const FeatureFamilyTable& table) {
  write_dataset(dir / "data" / "dataset", dataset, table);
}

void save_models(const fs::path& dir, const ModelSet& models) {
  for (const auto& [name, model] : models.models)
    write_json_file(dir / "models" / (name + ".json"), prediction_model_to_json(*model));
  if (models.substitute) write_json_file(dir / "models" / "substitute.json", classifier_to_json(*models.substitute));
  write_vectors(dir / "models" / "transfer_train.jsonl", models.training_pool);
  write_vectors(dir / "models" / "transfer_test.jsonl", models.test_pool);
}

void save_calibration(const fs::path& dir, const DefenseSet& d) {
  json j = stats_to_json(d.calibration.stats);
  j["maxRecLossD"] = d.calibration.max_rec_loss;
  j["min_history_for_empirical"] = d.calibration.min_history;
  j["clamp"] = d.calibration.clamp;
  j["autoencoder"] = "autoencoder.json";
  write_json_file(dir / "defense" / "calibration.json", j);
  write_json_file(dir / "defense" / "autoencoder.json", autoencoder_to_json(*d.calibration.autoencoder));
  write_json_file(dir / "defense" / "sd_threshold.json", sd_threshold_to_json(d.sd));
}

void save_decision(const fs::path& dir, const DefenseSet& d) {
  write_decision_csv(dir / "defense" / "decision_dataset.csv", d.decision_rows);
  write_json_file(dir / "defense" / "decision_lr.json", decision_model_to_json(*d.decision_lr));
  write_json_file(dir / "defense" / "decision_nn.json", decision_model_to_json(*d.decision_nn));
}

std::pair<Dataset, FeatureFamilyTable> load_data(const fs::path& dir) {
  require(dir / "data" / "dataset.header.json");
  require(dir / "data" / "dataset.jsonl");
  return read_dataset(dir / "data" / "dataset");
}

ModelSet load_models(const fs::path& dir) {
  ModelSet set;
  for (const auto& name : kModels) {
    const auto path = dir / "models" / (name + ".json");
    require(path);
    set.models[name] = prediction_model_from_json(read_json_file(path));
  }
  require(dir / "models" / "substitute.json");
  set.substitute = std::make_shared<MlpClassifier>(classifier_from_json(read_json_file(dir / "models" / "substitute.json")));
  set.training_pool = read_vectors(dir / "models" / "transfer_train.jsonl");
  set.test_pool = read_vectors(dir / "models" / "transfer_test.jsonl");
  return set;
}

DefenseSet load_calibration(const fs::path& dir) {
  DefenseSet d;
  const auto path = dir / "defense" / "calibration.json";
  require(path);
  const json j = read_json_file(path);
  try {
    d.calibration.stats = stats_from_json(j);
    d.calibration.max_rec_loss = j.at("maxRecLossD").get<double>();
    d.calibration.min_history = j.at("min_history_for_empirical").get<std::size_t>();
    d.calibration.clamp = j.value("clamp", true);
    const auto ae_path = dir / "defense" / j.at("autoencoder").get<std::string>();
    require(ae_path);
    d.calibration.autoencoder = std::make_shared<Autoencoder>(autoencoder_from_json(read_json_file(ae_path)));
  } catch (const json::exception& e) {
    throw ArtifactError("malformed calibration artifact: " + std::string(e.what()));
  }
  d.calibration.validate();
  require(dir / "defense" / "sd_threshold.json");
  d.sd = sd_threshold_from_json(read_json_file(dir / "defense" / "sd_threshold.json"));
  return d;
}

void load_decision(const fs::path& dir, DefenseSet& d, std::uint64_t split_seed, double train_share) {
  for (const char* f : {"decision_dataset.csv", "decision_lr.json", "decision_nn.json"}) require(dir / "defense" / f);
  d.decision_rows = read_decision_csv(dir / "defense" / "decision_dataset.csv");
  assign_decision_splits(d.decision_rows, split_seed, train_share);
  d.decision_lr = std::make_shared<DecisionModel>(decision_model_from_json(read_json_file(dir / "defense" / "decision_lr.json")));
  d.decision_nn = std::make_shared<DecisionModel>(decision_model_from_json(read_json_file(dir / "defense" / "decision_nn.json")));
}

Artifacts load_all(const fs::path& dir, const ExperimentConfig& config) {
  Artifacts a;
  std::tie(a.dataset, a.table) = load_data(dir);
  a.models = load_models(dir);
  a.defenses = load_calibration(dir);
  load_decision(dir, a.defenses, stage_seed(config.seed, kDecisionDataStream), config.decision_sim.train_share);
  return a;
}

}  // namespace malprotect
