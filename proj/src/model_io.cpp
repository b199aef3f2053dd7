#include "malprotect/model_io.hpp"

#include <cmath>

#include "malprotect/errors.hpp"

namespace malprotect {

using nlohmann::json;

json network_to_json(const Mlp<double>& net) {
  json weights = json::array(), biases = json::array();
  for (const auto& layer : net.layers()) {
    std::vector<double> w;
    w.reserve(std::size_t(layer.weights.size()));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) w.push_back(layer.weights(r, c));
    weights.push_back(std::move(w));
    biases.push_back(std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size()));
  }
  return json{{"layer_sizes", net.sizes()},
              {"output", net.output() == OutputKind::softmax ? "softmax" : "sigmoid"},
              {"temperature", net.temperature()},
              {"weights", std::move(weights)},
              {"biases", std::move(biases)}};
}

Mlp<double> network_from_json(const json& j) {
  try {
    const auto sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    const auto out = j.at("output").get<std::string>();
    if (out != "softmax" && out != "sigmoid") throw ArtifactError("unknown output kind " + out);
    Mlp<double> net(sizes, out == "softmax" ? OutputKind::softmax : OutputKind::sigmoid);
    net.set_temperature(j.value("temperature", 1.0));
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != net.layers().size() || biases.size() != net.layers().size())
      throw ArtifactError("layer count differs from layer_sizes");
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      auto& layer = net.layers()[l];
      const auto w = weights[l].get<std::vector<double>>();
      const auto b = biases[l].get<std::vector<double>>();
      if (w.size() != std::size_t(layer.weights.size()) || b.size() != std::size_t(layer.bias.size()))
        throw ArtifactError("weight array size differs from layer shape");
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = w[k++];
      for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = b[std::size_t(r)];
    }
    return net;
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("malformed network artifact: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ArtifactError(std::string("invalid network artifact: ") + e.what());
  }
}

json meta_to_json(const TrainingMeta& meta) {
  json j{{"epochs", meta.epochs},
         {"learning_rate", meta.learning_rate},
         {"batch_size", meta.batch_size},
         {"seed", meta.seed},
         {"temperature", meta.temperature}};
  j["validation_accuracy"] = std::isnan(meta.validation_accuracy) ? json(nullptr) : json(meta.validation_accuracy);
  return j;
}

TrainingMeta meta_from_json(const json& j) {
  TrainingMeta m;
  m.epochs = j.value("epochs", std::size_t{0});
  m.learning_rate = j.value("learning_rate", 0.0);
  m.batch_size = j.value("batch_size", std::size_t{0});
  m.seed = j.value("seed", std::uint64_t{0});
  m.temperature = j.value("temperature", 1.0);
  if (j.contains("validation_accuracy") && j["validation_accuracy"].is_number())
    m.validation_accuracy = j["validation_accuracy"].get<double>();
  return m;
}

json classifier_to_json(const MlpClassifier& model) {
  json j = network_to_json(model.network());
  j["kind"] = model.kind();
  j["training_meta"] = meta_to_json(model.meta());
  return j;
}

MlpClassifier classifier_from_json(const json& j) {
  try {
    return MlpClassifier(network_from_json(j), meta_from_json(j.at("training_meta")), j.at("kind").get<std::string>());
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("malformed classifier artifact: ") + e.what());
  } catch (const ConfigError& e) {
    throw ArtifactError(std::string("invalid classifier artifact: ") + e.what());
  }
}

json autoencoder_to_json(const Autoencoder& ae) {
  json j = network_to_json(ae.network());
  j["kind"] = "autoencoder";
  j["training_meta"] = meta_to_json(ae.meta());
  return j;
}

Autoencoder autoencoder_from_json(const json& j) {
  try {
    return Autoencoder(network_from_json(j), meta_from_json(j.value("training_meta", json::object())));
  } catch (const ConfigError& e) {
    throw ArtifactError(std::string("invalid autoencoder artifact: ") + e.what());
  }
}

json prediction_model_to_json(const PredictionModel& model) {
  if (const auto* mlp = dynamic_cast<const MlpClassifier*>(&model)) return classifier_to_json(*mlp);
  if (const auto* ens = dynamic_cast<const EnsembleModel*>(&model)) {
    json members = json::array();
    for (const auto& m : ens->members()) members.push_back(prediction_model_to_json(*m));
    return json{{"kind", ens->kind()}, {"members", std::move(members)}};
  }
  throw ArtifactError("cannot serialise model of kind " + model.kind());
}

std::shared_ptr<const PredictionModel> prediction_model_from_json(const json& j) {
  if (!j.is_object()) throw ArtifactError("model artifact must be a JSON object");
  const auto kind = j.value("kind", std::string{});
  if (kind == "majority" || kind == "veto") {
    const auto it = j.find("members");
    if (it == j.end() || !it->is_array()) throw ArtifactError("ensemble artifact needs a members array");
    std::vector<std::shared_ptr<const PredictionModel>> members;
    for (const auto& m : *it) members.push_back(prediction_model_from_json(m));
    try {
      return std::make_shared<EnsembleModel>(std::move(members), kind == "majority" ? VoteMode::majority : VoteMode::veto);
    } catch (const ConfigError& e) {
      throw ArtifactError(std::string("invalid ensemble artifact: ") + e.what());
    }
  }
  return std::make_shared<MlpClassifier>(classifier_from_json(j));
}

}  // namespace malprotect
