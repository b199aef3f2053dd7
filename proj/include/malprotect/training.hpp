#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "malprotect/classifier.hpp"
#include "malprotect/dataset.hpp"
#include "malprotect/dense_net.hpp"

namespace malprotect {

/// Plain minibatch SGD with a fixed learning rate and seeded shuffling.
struct TrainingParams {
  std::size_t epochs = 20;
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
};

/// Hidden widths of the reference neural network classifier.
inline const std::vector<std::size_t> kDefaultHidden{128, 64, 32};

/// dim x N matrix, one dense 0/1 column per vector.
Eigen::MatrixXd to_matrix(std::span<const FeatureVector> vectors);
Eigen::MatrixXd to_matrix(std::span<const LabeledSample> samples);
/// 2 x N one-hot matrix.
Eigen::MatrixXd one_hot(std::span<const LabeledSample> samples);

/// Runs SGD over the columns of `inputs` / `targets`. Deterministic given rng.
void fit(Mlp<double>& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
         const TrainingParams& params, Rng& rng);

/// Trains on the train split and records validation accuracy. Throws
/// TrainingError when the train split lacks either class.
MlpClassifier train_mlp(const Dataset& dataset, const std::vector<std::size_t>& hidden, const TrainingParams& params,
                        std::uint64_t seed);
MlpClassifier train_mlp(std::span<const LabeledSample> train, std::span<const LabeledSample> validation,
                        std::size_t dim, const std::vector<std::size_t>& hidden, const TrainingParams& params,
                        std::uint64_t seed);

MlpClassifier train_logistic(const Dataset& dataset, const TrainingParams& params, std::uint64_t seed);

double accuracy(const PredictionModel& model, std::span<const LabeledSample> samples);

/// Compares backprop against central differences on `n_weights` randomly
/// chosen parameters (weights and biases) for the loss at (x, target).
/// Returns the largest |analytic - numeric| / max(|analytic| + |numeric|, 1e-8).
double finite_difference_check(const Mlp<double>& net, const Eigen::VectorXd& x, const Eigen::VectorXd& target,
                               double epsilon, std::size_t n_weights, std::uint64_t seed);

}  // namespace malprotect
