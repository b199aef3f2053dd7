#include "malprotect/synthetic.hpp"

#include <random>

#include "malprotect/errors.hpp"

namespace malprotect {

void SyntheticConfig::validate() const {
  auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!unit(benign_prototype_density) || !unit(malware_prototype_density))
    throw ConfigError("prototype densities must lie in [0, 1]");
  if (!unit(flip_noise)) throw ConfigError("flip_noise must lie in [0, 1]");
  if (dim == 0 || n_families == 0 || n_families > dim) throw ConfigError("need dim >= n_families >= 1");
  if (n_per_class == 0) throw ConfigError("n_per_class must be positive");
}

std::pair<Dataset, FeatureFamilyTable> generate_synthetic_dataset(const SyntheticConfig& config,
                                                                  std::uint64_t seed) {
  config.validate();
  Rng rng(seed);

  auto draw_prototype = [&](double density) {
    std::bernoulli_distribution bit(density);
    std::vector<bool> proto(config.dim);
    for (std::size_t i = 0; i < config.dim; ++i) proto[i] = bit(rng);
    return proto;
  };
  const auto benign = draw_prototype(config.benign_prototype_density);
  const auto malware = draw_prototype(config.malware_prototype_density);

  Dataset dataset;
  dataset.dim = config.dim;
  dataset.samples.reserve(2 * config.n_per_class);
  std::bernoulli_distribution flip(config.flip_noise);
  for (Label label : {Label::benign, Label::malware}) {
    const auto& proto = label == Label::benign ? benign : malware;
    for (std::size_t n = 0; n < config.n_per_class; ++n) {
      std::vector<FeatureIndex> enabled;
      for (std::size_t i = 0; i < config.dim; ++i) {
        const bool bit = proto[i] != flip(rng);
        if (bit) enabled.push_back(static_cast<FeatureIndex>(i));
      }
      dataset.samples.push_back({FeatureVector(config.dim, std::move(enabled)), label, Split::train});
    }
  }
  assign_splits(dataset, config.split, rng());
  return {std::move(dataset), FeatureFamilyTable::round_robin(config.dim, config.n_families, config.add_only)};
}

}  // namespace malprotect
