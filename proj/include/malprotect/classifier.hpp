#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "malprotect/dataset.hpp"
#include "malprotect/dense_net.hpp"
#include "malprotect/feature_vector.hpp"

namespace malprotect {

/// The benign/malware classifier a stateful defense protects.
class PredictionModel {
 public:
  virtual ~PredictionModel() = default;
  /// Probability of the malware class.
  virtual double predict_proba(const FeatureVector& v) const = 0;
  virtual Label predict_label(const FeatureVector& v) const {
    return predict_proba(v) >= 0.5 ? Label::malware : Label::benign;
  }
  virtual std::string kind() const = 0;
};

struct TrainingMeta {
  std::size_t epochs = 0;
  double learning_rate = 0;
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;
  double temperature = 1.0;
  double validation_accuracy = std::numeric_limits<double>::quiet_NaN();
};

/// Two-way softmax classifier; output unit 1 is the malware class. With no
/// hidden layers this is logistic regression.
class MlpClassifier : public PredictionModel {
 public:
  MlpClassifier(Mlp<double> net, TrainingMeta meta, std::string kind = "mlp");

  double predict_proba(const FeatureVector& v) const override;
  std::string kind() const override { return kind_; }

  Eigen::Vector2d distribution(const FeatureVector& v) const;
  Eigen::Vector2d distribution(const Eigen::VectorXd& x) const;
  Eigen::VectorXd logits(const Eigen::VectorXd& x) const;
  /// d cross-entropy(target) / d input at a real-valued point.
  Eigen::VectorXd input_gradient(const Eigen::VectorXd& x, Label target) const;

  const Mlp<double>& network() const noexcept { return net_; }
  Mlp<double>& network() noexcept { return net_; }
  const TrainingMeta& meta() const noexcept { return meta_; }
  TrainingMeta& meta() noexcept { return meta_; }
  void set_kind(std::string kind) { kind_ = std::move(kind); }

  /// Logistic view (only meaningful without hidden layers): coefficient per
  /// input and intercept of the malware log-odds.
  Eigen::VectorXd logistic_coefficients() const;
  double logistic_intercept() const;

 private:
  Mlp<double> net_;
  TrainingMeta meta_;
  std::string kind_;
};

enum class VoteMode { majority, veto };

/// Majority: modal member label (odd member count, at least 3).
/// Veto: malware if any member says malware (at least 2 members).
///
/// predict_proba is the malware vote share for majority and the largest
/// member probability for veto, so that `proba >= 0.5` agrees with the vote.
class EnsembleModel : public PredictionModel {
 public:
  EnsembleModel(std::vector<std::shared_ptr<const PredictionModel>> members, VoteMode mode);

  double predict_proba(const FeatureVector& v) const override;
  Label predict_label(const FeatureVector& v) const override;
  std::string kind() const override { return mode_ == VoteMode::majority ? "majority" : "veto"; }

  VoteMode mode() const noexcept { return mode_; }
  const std::vector<std::shared_ptr<const PredictionModel>>& members() const noexcept { return members_; }

 private:
  std::vector<std::shared_ptr<const PredictionModel>> members_;
  VoteMode mode_;
};

Label ensemble_vote(std::span<const Label> votes, VoteMode mode);

}  // namespace malprotect
