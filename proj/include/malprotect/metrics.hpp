#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "malprotect/dataset.hpp"

namespace malprotect {

/// Malware is the positive class.
struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  void add(Label truth, Label predicted);
};

struct MetricsReport {
  Confusion counts;
  double accuracy = 0;
  double fpr = 0;  ///< 0 when there are no negatives
  double f1 = 0;   ///< 0 when there are no positive predictions and no positives
  double auc = 0.5;
};

double accuracy(const Confusion& c);
double false_positive_rate(const Confusion& c);
double f1_score(const Confusion& c);

/// Rank-based (Mann-Whitney) AUC with midranks for ties. Throws ConfigError
/// unless both classes are present.
double rank_auc(std::span<const double> scores, std::span<const Label> truth);
/// Pairwise reference: P(score_pos > score_neg) + 0.5 P(tie).
double pairwise_auc(std::span<const double> scores, std::span<const Label> truth);

MetricsReport compute_metrics(std::span<const Label> truth, std::span<const Label> predicted,
                              std::span<const double> scores);

/// Median (mean of the two middle values for even counts); -1 when empty.
double median_or_minus_one(std::vector<std::size_t> values);

double mean_of(std::span<const double> v);
/// Sample standard deviation; 0 for fewer than two values.
double stdev_of(std::span<const double> v);

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
};
/// Ordinary least squares of y on x.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

}  // namespace malprotect
