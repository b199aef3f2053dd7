#include "malprotect/classifier.hpp"

#include <algorithm>

#include "malprotect/errors.hpp"

namespace malprotect {

MlpClassifier::MlpClassifier(Mlp<double> net, TrainingMeta meta, std::string kind)
    : net_(std::move(net)), meta_(meta), kind_(std::move(kind)) {
  if (net_.output_size() != 2 || net_.output() != OutputKind::softmax)
    throw ConfigError("classifier needs a two-way softmax output");
  net_.set_temperature(meta_.temperature);
}

Eigen::Vector2d MlpClassifier::distribution(const FeatureVector& v) const {
  if (v.dim() != net_.input_size()) throw DimensionMismatch("classifier input dimension mismatch");
  return net_.forward_sparse(v.enabled());
}

Eigen::Vector2d MlpClassifier::distribution(const Eigen::VectorXd& x) const {
  if (static_cast<std::size_t>(x.size()) != net_.input_size())
    throw DimensionMismatch("classifier input dimension mismatch");
  return net_.forward(x);
}

double MlpClassifier::predict_proba(const FeatureVector& v) const { return distribution(v)(1); }

Eigen::VectorXd MlpClassifier::logits(const Eigen::VectorXd& x) const {
  return net_.logits(Eigen::MatrixXd(x)).col(0);
}

Eigen::VectorXd MlpClassifier::input_gradient(const Eigen::VectorXd& x, Label target) const {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(2, 1);
  t(to_int(target), 0) = 1.0;
  return net_.input_gradient(Eigen::MatrixXd(x), t).col(0);
}

Eigen::VectorXd MlpClassifier::logistic_coefficients() const {
  const auto& W = net_.layers().back().weights;
  if (net_.layers().size() != 1) throw ConfigError("logistic view needs a network without hidden layers");
  return (W.row(1) - W.row(0)).transpose() / meta_.temperature;
}

double MlpClassifier::logistic_intercept() const {
  if (net_.layers().size() != 1) throw ConfigError("logistic view needs a network without hidden layers");
  const auto& b = net_.layers().back().bias;
  return (b(1) - b(0)) / meta_.temperature;
}

Label ensemble_vote(std::span<const Label> votes, VoteMode mode) {
  const auto malware = std::count(votes.begin(), votes.end(), Label::malware);
  if (mode == VoteMode::veto) return malware > 0 ? Label::malware : Label::benign;
  return 2 * static_cast<std::size_t>(malware) > votes.size() ? Label::malware : Label::benign;
}

EnsembleModel::EnsembleModel(std::vector<std::shared_ptr<const PredictionModel>> members, VoteMode mode)
    : members_(std::move(members)), mode_(mode) {
  if (mode_ == VoteMode::majority && (members_.size() < 3 || members_.size() % 2 == 0))
    throw ConfigError("majority voting needs an odd number of at least 3 members");
  if (mode_ == VoteMode::veto && members_.size() < 2) throw ConfigError("veto voting needs at least 2 members");
  for (const auto& m : members_)
    if (!m) throw ConfigError("null ensemble member");
}

double EnsembleModel::predict_proba(const FeatureVector& v) const {
  if (mode_ == VoteMode::veto) {
    double best = 0;
    for (const auto& m : members_) best = std::max(best, m->predict_proba(v));
    return best;
  }
  std::size_t malware = 0;
  for (const auto& m : members_) malware += m->predict_label(v) == Label::malware;
  return double(malware) / double(members_.size());
}

Label EnsembleModel::predict_label(const FeatureVector& v) const {
  std::vector<Label> votes;
  votes.reserve(members_.size());
  for (const auto& m : members_) votes.push_back(m->predict_label(v));
  return ensemble_vote(votes, mode_);
}

}  // namespace malprotect
