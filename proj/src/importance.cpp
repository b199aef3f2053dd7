#include "malprotect/importance.hpp"

#include <algorithm>
#include <cmath>

#include "malprotect/errors.hpp"

namespace malprotect {

IndicatorArray background_mean(const std::vector<ScoreRow>& background) {
  if (background.empty()) throw ConfigError("importance needs a nonempty background");
  IndicatorArray mean{};
  for (const auto& r : background) {
    const auto a = r.scores.as_array();
    for (std::size_t j = 0; j < kIndicatorCount; ++j) mean[j] += a[j];
  }
  for (auto& m : mean) m /= double(background.size());
  // Second pass removes the rounding of the plain sum; a constant column comes out exact.
  IndicatorArray residual{};
  for (const auto& r : background) {
    const auto a = r.scores.as_array();
    for (std::size_t j = 0; j < kIndicatorCount; ++j) residual[j] += a[j] - mean[j];
  }
  for (std::size_t j = 0; j < kIndicatorCount; ++j) mean[j] += residual[j] / double(background.size());
  return mean;
}

IndicatorArray linear_attributions(const DecisionModel& model, const IndicatorArray& x, const IndicatorArray& mean) {
  const auto coef = model.coefficients();
  IndicatorArray out{};
  for (std::size_t j = 0; j < kIndicatorCount; ++j) out[j] = coef[j] * (x[j] - mean[j]);
  return out;
}

IndicatorArray feature_importance(const DecisionModel& model, const std::vector<ScoreRow>& background,
                                  std::uint64_t seed) {
  const IndicatorArray mean = background_mean(background);
  IndicatorArray importance{};

  if (model.kind() == DecisionKind::logistic) {
    for (const auto& r : background) {
      const auto a = linear_attributions(model, r.scores.as_array(), mean);
      for (std::size_t j = 0; j < kIndicatorCount; ++j) importance[j] += std::abs(a[j]);
    }
    for (auto& v : importance) v /= double(background.size());
    return importance;
  }

  std::vector<double> base(background.size());
  for (std::size_t i = 0; i < background.size(); ++i) base[i] = model.attack_probability(background[i].scores);

  Rng rng(seed);
  std::vector<std::size_t> perm(background.size());
  for (std::size_t j = 0; j < kIndicatorCount; ++j) {
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    double total = 0;
    for (std::size_t i = 0; i < background.size(); ++i) {
      auto a = background[i].scores.as_array();
      a[j] = background[perm[i]].scores.as_array()[j];
      total += std::abs(model.attack_probability(IndicatorScores::from_array(a)) - base[i]);
    }
    importance[j] = total / double(background.size());
  }
  return importance;
}

}  // namespace malprotect
