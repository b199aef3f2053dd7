#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "malprotect/classifier.hpp"
#include "malprotect/dense_net.hpp"
#include "malprotect/training.hpp"

namespace malprotect {

/// Undercomplete autoencoder: rectifier hidden layers, sigmoid output,
/// mean-squared reconstruction error.
class Autoencoder {
 public:
  Autoencoder() = default;
  explicit Autoencoder(Mlp<double> net, TrainingMeta meta = {});

  std::size_t dim() const noexcept { return net_.input_size(); }
  Eigen::VectorXd reconstruct(const FeatureVector& v) const;
  /// mean over features of (bit - reconstruction)^2.
  double reconstruction_loss(const FeatureVector& v) const;

  const Mlp<double>& network() const noexcept { return net_; }
  const TrainingMeta& meta() const noexcept { return meta_; }

 private:
  Mlp<double> net_;
  TrainingMeta meta_;
};

/// dim -> max(16, dim/8) -> max(8, dim/32) -> max(16, dim/8) -> dim.
std::vector<std::size_t> default_autoencoder_hidden(std::size_t dim);

/// Throws ConfigError unless every hidden width is below dim.
Autoencoder train_autoencoder(std::span<const FeatureVector> training, const std::vector<std::size_t>& hidden,
                              const TrainingParams& params, std::uint64_t seed);

}  // namespace malprotect
