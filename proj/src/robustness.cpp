#include "malprotect/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "malprotect/errors.hpp"

namespace malprotect {

std::size_t adversarial_quota(std::size_t train_size, std::size_t pool_size, double fraction) {
  if (!(fraction > 0 && fraction <= 1)) throw ConfigError("adversarial fraction must lie in (0, 1]");
  const auto quota = static_cast<std::size_t>(std::floor(fraction * double(train_size)));
  return std::min(quota, pool_size);
}

MlpClassifier adversarially_train(const Dataset& base, std::span<const FeatureVector> adversarial, double fraction,
                                  const std::vector<std::size_t>& hidden, const TrainingParams& params,
                                  std::uint64_t seed, AdversarialTrainingReport* report) {
  auto train = base.subset(Split::train);
  const auto validation = base.subset(Split::validation);
  const std::size_t quota = adversarial_quota(train.size(), adversarial.size(), fraction);

  AdversarialTrainingReport local;
  if (adversarial.empty()) local.warnings.push_back("empty adversarial pool; trained without augmentation");

  std::vector<std::size_t> pick(adversarial.size());
  std::iota(pick.begin(), pick.end(), std::size_t{0});
  Rng rng(seed ^ 0x5bd1e995ULL);
  std::shuffle(pick.begin(), pick.end(), rng);
  for (std::size_t k = 0; k < quota; ++k) train.push_back({adversarial[pick[k]], Label::malware, Split::train});
  local.injected = quota;

  auto model = train_mlp(train, validation, base.dim, hidden, params, seed);
  model.set_kind("nn-at");
  if (report) *report = std::move(local);
  return model;
}

MlpClassifier distill(const MlpClassifier& teacher, const Dataset& dataset, double temperature,
                      const TrainingParams& params, std::uint64_t seed) {
  if (!(temperature > 0)) throw ConfigError("distillation temperature must be positive");
  const auto train = dataset.subset(Split::train);
  const auto validation = dataset.subset(Split::validation);
  const Eigen::MatrixXd X = to_matrix(train);

  Mlp<double> softener = teacher.network();
  softener.set_temperature(temperature);
  const Eigen::MatrixXd soft = softener.forward(X);

  Rng rng(seed);
  auto net = Mlp<double>::initialized(teacher.network().sizes(), OutputKind::softmax, rng);
  net.set_temperature(temperature);
  fit(net, X, soft, params, rng);

  TrainingMeta meta{params.epochs, params.learning_rate, params.batch_size, seed, temperature};
  MlpClassifier student(std::move(net), meta, "nn-dd");
  student.meta().validation_accuracy = accuracy(student, validation);
  return student;
}

EnsembleModel train_ensemble(const Dataset& dataset, VoteMode mode,
                             const std::vector<std::vector<std::size_t>>& member_hidden, const TrainingParams& params,
                             std::uint64_t seed) {
  std::vector<std::shared_ptr<const PredictionModel>> members;
  for (std::size_t k = 0; k < member_hidden.size(); ++k)
    members.push_back(std::make_shared<MlpClassifier>(train_mlp(dataset, member_hidden[k], params, seed + 1000 * (k + 1))));
  return EnsembleModel(std::move(members), mode);
}

}  // namespace malprotect
