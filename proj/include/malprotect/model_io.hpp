#pragma once

#include <filesystem>
#include <memory>

#include <json.hpp>

#include "malprotect/autoencoder.hpp"
#include "malprotect/classifier.hpp"

namespace malprotect {

// Model artifact:
//   {"kind", "layer_sizes", "output": "softmax"|"sigmoid",
//    "weights": [row-major W per layer], "biases": [b per layer],
//    "training_meta": {epochs, learning_rate, batch_size, seed, temperature, validation_accuracy}}
// Doubles are written with round-trip precision, so a loaded model evaluates
// bit-identically to the saved one (same evaluation order: per layer,
// first-layer column accumulation in ascending feature order, then Eigen
// dense products).
// Ensembles: {"kind": "majority"|"veto", "members": [model artifact, ...]}.

nlohmann::json network_to_json(const Mlp<double>& net);
Mlp<double> network_from_json(const nlohmann::json& j);

nlohmann::json meta_to_json(const TrainingMeta& meta);
TrainingMeta meta_from_json(const nlohmann::json& j);

nlohmann::json classifier_to_json(const MlpClassifier& model);
MlpClassifier classifier_from_json(const nlohmann::json& j);

nlohmann::json autoencoder_to_json(const Autoencoder& ae);
Autoencoder autoencoder_from_json(const nlohmann::json& j);

/// MlpClassifier or EnsembleModel.
nlohmann::json prediction_model_to_json(const PredictionModel& model);
std::shared_ptr<const PredictionModel> prediction_model_from_json(const nlohmann::json& j);

}  // namespace malprotect
