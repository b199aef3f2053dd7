#include "malprotect/training.hpp"

#include <algorithm>
#include <numeric>

#include "malprotect/errors.hpp"

namespace malprotect {

Eigen::MatrixXd to_matrix(std::span<const FeatureVector> vectors) {
  const auto dim = vectors.empty() ? 0 : Eigen::Index(vectors.front().dim());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, Eigen::Index(vectors.size()));
  for (std::size_t c = 0; c < vectors.size(); ++c)
    for (FeatureIndex i : vectors[c].enabled()) m(i, Eigen::Index(c)) = 1.0;
  return m;
}

Eigen::MatrixXd to_matrix(std::span<const LabeledSample> samples) {
  const auto dim = samples.empty() ? 0 : Eigen::Index(samples.front().vector.dim());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, Eigen::Index(samples.size()));
  for (std::size_t c = 0; c < samples.size(); ++c)
    for (FeatureIndex i : samples[c].vector.enabled()) m(i, Eigen::Index(c)) = 1.0;
  return m;
}

Eigen::MatrixXd one_hot(std::span<const LabeledSample> samples) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(2, Eigen::Index(samples.size()));
  for (std::size_t c = 0; c < samples.size(); ++c) t(to_int(samples[c].label), Eigen::Index(c)) = 1.0;
  return t;
}

void fit(Mlp<double>& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
         const TrainingParams& params, Rng& rng) {
  if (inputs.cols() != targets.cols()) throw TrainingError("input and target counts differ");
  if (params.batch_size == 0) throw ConfigError("batch size must be positive");
  const auto n = static_cast<std::size_t>(inputs.cols());
  if (n == 0) return;
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Mlp<double>::Gradient grad;
  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += params.batch_size) {
      const std::size_t end = std::min(n, start + params.batch_size);
      const auto b = Eigen::Index(end - start);
      Eigen::MatrixXd xb(inputs.rows(), b), tb(targets.rows(), b);
      for (Eigen::Index k = 0; k < b; ++k) {
        xb.col(k) = inputs.col(order[start + std::size_t(k)]);
        tb.col(k) = targets.col(order[start + std::size_t(k)]);
      }
      net.backward(xb, tb, grad);
      net.step(grad, params.learning_rate);
    }
  }
}

double accuracy(const PredictionModel& model, std::span<const LabeledSample> samples) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t correct = 0;
  for (const auto& s : samples) correct += model.predict_label(s.vector) == s.label;
  return double(correct) / double(samples.size());
}

MlpClassifier train_mlp(std::span<const LabeledSample> train, std::span<const LabeledSample> validation,
                        std::size_t dim, const std::vector<std::size_t>& hidden, const TrainingParams& params,
                        std::uint64_t seed) {
  const auto malware = std::count_if(train.begin(), train.end(), [](const auto& s) { return s.label == Label::malware; });
  if (malware == 0 || static_cast<std::size_t>(malware) == train.size())
    throw TrainingError("training data must contain both classes");

  Rng rng(seed);
  std::vector<std::size_t> sizes{dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(2);
  auto net = Mlp<double>::initialized(sizes, OutputKind::softmax, rng);
  fit(net, to_matrix(train), one_hot(train), params, rng);

  TrainingMeta meta{params.epochs, params.learning_rate, params.batch_size, seed, 1.0};
  MlpClassifier model(std::move(net), meta, hidden.empty() ? "logistic" : "mlp");
  model.meta().validation_accuracy = accuracy(model, validation);
  return model;
}

MlpClassifier train_mlp(const Dataset& dataset, const std::vector<std::size_t>& hidden, const TrainingParams& params,
                        std::uint64_t seed) {
  const auto train = dataset.subset(Split::train);
  const auto validation = dataset.subset(Split::validation);
  return train_mlp(train, validation, dataset.dim, hidden, params, seed);
}

MlpClassifier train_logistic(const Dataset& dataset, const TrainingParams& params, std::uint64_t seed) {
  return train_mlp(dataset, {}, params, seed);
}

double finite_difference_check(const Mlp<double>& net, const Eigen::VectorXd& x, const Eigen::VectorXd& target,
                               double epsilon, std::size_t n_weights, std::uint64_t seed) {
  if (!(epsilon > 0 && epsilon <= 1e-2)) throw ConfigError("finite-difference epsilon must lie in (0, 1e-2]");
  const Eigen::MatrixXd X = x;
  const Eigen::MatrixXd T = target;
  Mlp<double>::Gradient grad;
  net.backward(X, T, grad);

  // Enumerate (layer, is_bias, row, col) slots and sample uniformly.
  struct Slot {
    std::size_t layer;
    bool bias;
    Eigen::Index row, col;
  };
  std::vector<Slot> slots;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto& W = net.layers()[l].weights;
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
      slots.push_back({l, true, r, 0});
      for (Eigen::Index c = 0; c < W.cols(); ++c) slots.push_back({l, false, r, c});
    }
  }
  Rng rng(seed);
  std::shuffle(slots.begin(), slots.end(), rng);
  if (n_weights < slots.size()) slots.resize(n_weights);

  Mlp<double> probe = net;
  double worst = 0;
  for (const Slot& s : slots) {
    double& param = s.bias ? probe.layers()[s.layer].bias(s.row) : probe.layers()[s.layer].weights(s.row, s.col);
    const double saved = param;
    param = saved + epsilon;
    const double up = probe.loss(X, T);
    param = saved - epsilon;
    const double down = probe.loss(X, T);
    param = saved;
    const double numeric = (up - down) / (2 * epsilon);
    const double analytic = s.bias ? grad.bias[s.layer](s.row) : grad.weights[s.layer](s.row, s.col);
    const double err = std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), 1e-8);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace malprotect
