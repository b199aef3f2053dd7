#include "malprotect/autoencoder.hpp"

#include <algorithm>

#include "malprotect/errors.hpp"

namespace malprotect {

Autoencoder::Autoencoder(Mlp<double> net, TrainingMeta meta) : net_(std::move(net)), meta_(meta) {
  if (net_.output() != OutputKind::sigmoid || net_.input_size() != net_.output_size())
    throw ConfigError("autoencoder needs a sigmoid output as wide as its input");
  if (net_.sizes().size() < 3) throw ConfigError("autoencoder needs at least one hidden layer");
  const auto& s = net_.sizes();
  if (*std::min_element(s.begin() + 1, s.end() - 1) >= net_.input_size())
    throw ConfigError("autoencoder bottleneck must be narrower than the input");
}

Eigen::VectorXd Autoencoder::reconstruct(const FeatureVector& v) const {
  if (v.dim() != dim()) throw DimensionMismatch("autoencoder input dimension mismatch");
  return net_.forward_sparse(v.enabled());
}

double Autoencoder::reconstruction_loss(const FeatureVector& v) const {
  Eigen::VectorXd r = reconstruct(v);
  for (FeatureIndex i : v.enabled()) r(i) -= 1.0;
  return r.squaredNorm() / double(r.size());
}

std::vector<std::size_t> default_autoencoder_hidden(std::size_t dim) {
  const std::size_t outer = std::max<std::size_t>(16, dim / 8);
  const std::size_t inner = std::max<std::size_t>(8, dim / 32);
  return {outer, inner, outer};
}

Autoencoder train_autoencoder(std::span<const FeatureVector> training, const std::vector<std::size_t>& hidden,
                              const TrainingParams& params, std::uint64_t seed) {
  if (training.empty()) throw TrainingError("autoencoder needs training vectors");
  const std::size_t dim = training.front().dim();
  if (hidden.empty() || *std::min_element(hidden.begin(), hidden.end()) >= dim)
    throw ConfigError("autoencoder bottleneck must be narrower than the input");
  Rng rng(seed);
  std::vector<std::size_t> sizes{dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(dim);
  auto net = Mlp<double>::initialized(sizes, OutputKind::sigmoid, rng);
  const Eigen::MatrixXd X = to_matrix(training);
  fit(net, X, X, params, rng);
  return Autoencoder(std::move(net), TrainingMeta{params.epochs, params.learning_rate, params.batch_size, seed, 1.0});
}

}  // namespace malprotect
