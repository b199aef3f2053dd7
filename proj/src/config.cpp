#include "malprotect/config.hpp"

#include <algorithm>
#include <cstdio>

#include "malprotect/dataset_io.hpp"
#include "malprotect/errors.hpp"

namespace malprotect {

using nlohmann::json;

namespace {

json params_json(const TrainingParams& p) {
  return {{"epochs", p.epochs}, {"learning_rate", p.learning_rate}, {"batch_size", p.batch_size}};
}

TrainingParams params_from(const json& j) {
  return {j.at("epochs").get<std::size_t>(), j.at("learning_rate").get<double>(), j.at("batch_size").get<std::size_t>()};
}

void check_params(const TrainingParams& p, const std::string& what) {
  if (p.epochs == 0 || p.batch_size == 0 || !(p.learning_rate > 0))
    throw ConfigError(what + ": epochs, batch_size and learning_rate must be positive");
}

/// Rejects keys of `given` that the defaults do not know, descending into objects.
void reject_unknown(const json& defaults, const json& given, const std::string& path) {
  if (!given.is_object()) throw ConfigError("config field '" + path + "' must be an object");
  for (const auto& [key, value] : given.items()) {
    const std::string here = path.empty() ? key : path + "." + key;
    if (!defaults.contains(key)) throw ConfigError("unknown config field '" + here + "'");
    if (defaults[key].is_object()) reject_unknown(defaults[key], value, here);
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  data.validate();
  if (hidden.empty()) throw ConfigError("hidden layer list must be nonempty");
  check_params(model_training, "model_training");
  check_params(autoencoder_training, "autoencoder_training");
  check_params(decision_training_logistic, "decision_training_logistic");
  check_params(decision_training_mlp, "decision_training_mlp");
  if (!(adversarial_fraction >= 0 && adversarial_fraction <= 1)) throw ConfigError("adversarial_fraction must lie in [0, 1]");
  if (!(transfer_epsilon > 0)) throw ConfigError("transfer_epsilon must be positive");
  if (!(distill_temperature > 0)) throw ConfigError("distill_temperature must be positive");
  if (ensemble_hidden.size() < 3 || ensemble_hidden.size() % 2 == 0)
    throw ConfigError("ensembles need an odd number (at least 3) of members");
  if (pair_budget == 0) throw ConfigError("pair_budget must be positive");
  if (min_history == 0) throw ConfigError("min_history must be positive");
  decision_sim.validate();
  if (history_capacity == 0) throw ConfigError("history_capacity must be positive");
  if (l0_threshold == 0) throw ConfigError("l0_threshold must be at least 1");
  if (sd_k == 0) throw ConfigError("sd_k must be positive");
  if (!(sd_percentile >= 0 && sd_percentile <= 100)) throw ConfigError("sd_percentile must lie in [0, 100]");
  if (!(prada_delta > 0 && prada_delta < 1)) throw ConfigError("prada_delta must lie in (0, 1)");
  if (n_init > history_capacity) throw ConfigError("n_init exceeds history capacity");
  if (defenses.empty() || models.empty()) throw ConfigError("defense and model lists must be nonempty");
  for (const auto& d : defenses)
    if (std::find(kDefenses.begin(), kDefenses.end(), d) == kDefenses.end()) throw ConfigError("unknown defense '" + d + "'");
  for (const auto& m : models)
    if (std::find(kModels.begin(), kModels.end(), m) == kModels.end()) throw ConfigError("unknown model '" + m + "'");
  if (std::find(kModels.begin(), kModels.end(), mix_model) == kModels.end())
    throw ConfigError("unknown mix model '" + mix_model + "'");
  AttackConfig{attack, 1, adaptive_m, adaptive_p, 0}.validate();
  if (n_max_grid.empty() || k_grid.empty() || q_grid.empty()) throw ConfigError("grids must be nonempty");
  for (auto n : n_max_grid)
    if (n == 0) throw ConfigError("n_max values must be positive");
  for (double k : k_grid)
    if (!(k >= 0 && k <= 1)) throw ConfigError("k values must lie in [0, 1]");
  if (!std::is_sorted(q_grid.begin(), q_grid.end()) || q_grid.front() == 0)
    throw ConfigError("q_grid must be positive and ascending");
  if (n_attack_samples == 0) throw ConfigError("n_attack_samples must be positive");
  if (mix_queries < 1000) throw ConfigError("mix_queries must be at least 1000");
  if (bench_predictions < 100) throw ConfigError("bench_predictions must be at least 100");
  if (bench_repeats == 0) throw ConfigError("bench_repeats must be positive");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
}

json config_to_json(const ExperimentConfig& c) {
  json mix = json::array();
  for (const auto& e : c.decision_sim.attack_mix)
    mix.push_back({{"strategy", to_string(e.strategy)}, {"weight", e.weight}, {"m", e.m}, {"p_values", e.p_values}});
  const auto& d = c.data;
  const auto& s = c.decision_sim;
  return {
      {"seed", c.seed},
      {"data",
       {{"dim", d.dim},
        {"n_per_class", d.n_per_class},
        {"benign_prototype_density", d.benign_prototype_density},
        {"malware_prototype_density", d.malware_prototype_density},
        {"flip_noise", d.flip_noise},
        {"n_families", d.n_families},
        {"add_only", d.add_only},
        {"split", {{"train", d.split.train}, {"validation", d.split.validation}, {"test", d.split.test}}}}},
      {"hidden", c.hidden},
      {"model_training", params_json(c.model_training)},
      {"substitute_hidden", c.substitute_hidden},
      {"adversarial_fraction", c.adversarial_fraction},
      {"transfer_epsilon", c.transfer_epsilon},
      {"transfer_rounds", c.transfer_rounds},
      {"distill_temperature", c.distill_temperature},
      {"ensemble_hidden", c.ensemble_hidden},
      {"autoencoder_training", params_json(c.autoencoder_training)},
      {"autoencoder_benign_only", c.autoencoder_benign_only},
      {"pair_budget", c.pair_budget},
      {"min_history", c.min_history},
      {"clamp_scores", c.clamp_scores},
      {"decision_sim",
       {{"n_legit_sessions", s.n_legit_sessions},
        {"legit_session_length", s.legit_session_length},
        {"n_attack_sessions", s.n_attack_sessions},
        {"attack_n_max", s.attack_n_max},
        {"n_init", s.n_init},
        {"defended_share", s.defended_share},
        {"attack_mix", mix},
        {"n_flood_sessions", s.n_flood_sessions},
        {"min_rows", s.min_rows},
        {"train_share", s.train_share}}},
      {"decision_training_logistic", params_json(c.decision_training_logistic)},
      {"decision_training_mlp", params_json(c.decision_training_mlp)},
      {"history_capacity", c.history_capacity},
      {"l0_threshold", c.l0_threshold},
      {"sd_k", c.sd_k},
      {"sd_percentile", c.sd_percentile},
      {"prada_delta", c.prada_delta},
      {"n_init", c.n_init},
      {"defenses", c.defenses},
      {"models", c.models},
      {"attack", to_string(c.attack)},
      {"adaptive_m", c.adaptive_m},
      {"adaptive_p", c.adaptive_p},
      {"n_max_grid", c.n_max_grid},
      {"n_attack_samples", c.n_attack_samples},
      {"k_grid", c.k_grid},
      {"mix_queries", c.mix_queries},
      {"mix_model", c.mix_model},
      {"q_grid", c.q_grid},
      {"bench_predictions", c.bench_predictions},
      {"bench_repeats", c.bench_repeats},
      {"seeds", c.seeds},
      {"output_dir", c.output_dir},
  };
}

ExperimentConfig config_from_json(const json& given) {
  const json defaults = config_to_json(ExperimentConfig{});
  reject_unknown(defaults, given, "");
  json j = defaults;
  j.merge_patch(given);

  ExperimentConfig c;
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto& d = j.at("data");
    c.data.dim = d.at("dim").get<std::size_t>();
    c.data.n_per_class = d.at("n_per_class").get<std::size_t>();
    c.data.benign_prototype_density = d.at("benign_prototype_density").get<double>();
    c.data.malware_prototype_density = d.at("malware_prototype_density").get<double>();
    c.data.flip_noise = d.at("flip_noise").get<double>();
    c.data.n_families = d.at("n_families").get<std::size_t>();
    c.data.add_only = d.at("add_only").get<bool>();
    c.data.split = {d.at("split").at("train").get<double>(), d.at("split").at("validation").get<double>(),
                    d.at("split").at("test").get<double>()};
    c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    c.model_training = params_from(j.at("model_training"));
    c.substitute_hidden = j.at("substitute_hidden").get<std::vector<std::size_t>>();
    c.adversarial_fraction = j.at("adversarial_fraction").get<double>();
    c.transfer_epsilon = j.at("transfer_epsilon").get<double>();
    c.transfer_rounds = j.at("transfer_rounds").get<std::size_t>();
    c.distill_temperature = j.at("distill_temperature").get<double>();
    c.ensemble_hidden = j.at("ensemble_hidden").get<std::vector<std::vector<std::size_t>>>();
    c.autoencoder_training = params_from(j.at("autoencoder_training"));
    c.autoencoder_benign_only = j.at("autoencoder_benign_only").get<bool>();
    c.pair_budget = j.at("pair_budget").get<std::size_t>();
    c.min_history = j.at("min_history").get<std::size_t>();
    c.clamp_scores = j.at("clamp_scores").get<bool>();
    const auto& s = j.at("decision_sim");
    c.decision_sim.n_legit_sessions = s.at("n_legit_sessions").get<std::size_t>();
    c.decision_sim.legit_session_length = s.at("legit_session_length").get<std::size_t>();
    c.decision_sim.n_attack_sessions = s.at("n_attack_sessions").get<std::size_t>();
    c.decision_sim.attack_n_max = s.at("attack_n_max").get<std::size_t>();
    c.decision_sim.n_init = s.at("n_init").get<std::size_t>();
    c.decision_sim.defended_share = s.at("defended_share").get<double>();
    c.decision_sim.attack_mix.clear();
    for (const auto& e : s.at("attack_mix"))
      c.decision_sim.attack_mix.push_back({attack_strategy_from_string(e.at("strategy").get<std::string>()),
                                           e.at("weight").get<double>(), e.at("m").get<std::size_t>(),
                                           e.at("p_values").get<std::vector<double>>()});
    c.decision_sim.n_flood_sessions = s.at("n_flood_sessions").get<std::size_t>();
    c.decision_sim.min_rows = s.at("min_rows").get<std::size_t>();
    c.decision_sim.train_share = s.at("train_share").get<double>();
    c.decision_training_logistic = params_from(j.at("decision_training_logistic"));
    c.decision_training_mlp = params_from(j.at("decision_training_mlp"));
    c.history_capacity = j.at("history_capacity").get<std::size_t>();
    c.l0_threshold = j.at("l0_threshold").get<std::size_t>();
    c.sd_k = j.at("sd_k").get<std::size_t>();
    c.sd_percentile = j.at("sd_percentile").get<double>();
    c.prada_delta = j.at("prada_delta").get<double>();
    c.n_init = j.at("n_init").get<std::size_t>();
    c.defenses = j.at("defenses").get<std::vector<std::string>>();
    c.models = j.at("models").get<std::vector<std::string>>();
    c.attack = attack_strategy_from_string(j.at("attack").get<std::string>());
    c.adaptive_m = j.at("adaptive_m").get<std::size_t>();
    c.adaptive_p = j.at("adaptive_p").get<double>();
    c.n_max_grid = j.at("n_max_grid").get<std::vector<std::size_t>>();
    c.n_attack_samples = j.at("n_attack_samples").get<std::size_t>();
    c.k_grid = j.at("k_grid").get<std::vector<double>>();
    c.mix_queries = j.at("mix_queries").get<std::size_t>();
    c.mix_model = j.at("mix_model").get<std::string>();
    c.q_grid = j.at("q_grid").get<std::vector<std::size_t>>();
    c.bench_predictions = j.at("bench_predictions").get<std::size_t>();
    c.bench_repeats = j.at("bench_repeats").get<std::size_t>();
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.output_dir = j.at("output_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  json j;
  try {
    j = read_json_file(path);
  } catch (const ArtifactError& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(j);
}

std::uint64_t config_hash(const ExperimentConfig& c) {
  const std::string text = config_to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace malprotect
