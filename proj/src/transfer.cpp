#include "malprotect/transfer.hpp"

#include "malprotect/perturb.hpp"

namespace malprotect {

namespace {

void sign_step(Eigen::VectorXd& x, const Eigen::VectorXd& grad, double step) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double g = grad(i);
    if (g > 0)
      x(i) -= step;
    else if (g < 0)
      x(i) += step;
  }
  x = x.cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace

std::vector<TransferExample> transferability_generate(const MlpClassifier& substitute,
                                                      std::span<const FeatureVector> malware,
                                                      const FeatureFamilyTable& table, double epsilon,
                                                      std::size_t max_rounds) {
  std::vector<TransferExample> out;
  for (std::size_t s = 0; s < malware.size(); ++s) {
    const FeatureVector& original = malware[s];
    Eigen::VectorXd x = original.to_dense();
    for (std::size_t round = 0; round < max_rounds; ++round) {
      sign_step(x, substitute.input_gradient(x, Label::benign), epsilon);
      FeatureVector candidate = discretize(std::span<const double>(x.data(), std::size_t(x.size())), original, table);
      if (candidate != original && substitute.predict_label(candidate) == Label::benign) {
        out.push_back({s, std::move(candidate)});
        break;
      }
    }
  }
  return out;
}

std::vector<FeatureVector> transfer_vectors(const std::vector<TransferExample>& examples) {
  std::vector<FeatureVector> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.vector);
  return out;
}

ContinuousAttackTally naive_continuous_attack(const MlpClassifier& model, std::span<const FeatureVector> malware,
                                              const FeatureFamilyTable& table, double step, std::size_t max_iters) {
  ContinuousAttackTally tally;
  for (const FeatureVector& original : malware) {
    if (model.predict_label(original) != Label::malware) continue;
    ++tally.attempted;
    Eigen::VectorXd x = original.to_dense();
    bool evaded = false;
    for (std::size_t it = 0; it < max_iters && !evaded; ++it) {
      sign_step(x, model.input_gradient(x, Label::benign), step);
      evaded = model.distribution(x)(1) < 0.5;
    }
    if (!evaded) continue;
    ++tally.continuous_evasions;
    const FeatureVector thresholded = FeatureVector::from_dense(x);
    if (model.predict_label(thresholded) == Label::benign) ++tally.discretized_evasions;
    const FeatureVector restored = discretize(std::span<const double>(x.data(), std::size_t(x.size())), original, table);
    if (model.predict_label(restored) == Label::benign) ++tally.surviving_evasions;
  }
  return tally;
}

}  // namespace malprotect
