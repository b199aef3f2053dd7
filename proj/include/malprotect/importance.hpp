#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "malprotect/decision.hpp"

namespace malprotect {

using IndicatorArray = std::array<double, kIndicatorCount>;

/// Column means of the background rows.
IndicatorArray background_mean(const std::vector<ScoreRow>& background);

/// Signed contributions coef_j * (x_j - mean_j) of a logistic decision model;
/// they sum to logit(x) - logit(mean).
IndicatorArray linear_attributions(const DecisionModel& model, const IndicatorArray& x, const IndicatorArray& mean);

/// Logistic: mean over the background of |coef_j * (x_j - mean_j)|.
/// MLP: mean absolute change in attack probability when column j is shuffled
/// across the background (seeded). Throws ConfigError on an empty background.
IndicatorArray feature_importance(const DecisionModel& model, const std::vector<ScoreRow>& background,
                                  std::uint64_t seed = 0);

}  // namespace malprotect
