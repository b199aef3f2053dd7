#pragma once

#include <array>
#include <cstddef>
#include <memory>

#include "malprotect/autoencoder.hpp"
#include "malprotect/dataset_stats.hpp"
#include "malprotect/history.hpp"

namespace malprotect {

inline constexpr std::size_t kDefaultMinHistory = 30;
inline constexpr std::size_t kIndicatorCount = 6;

/// Training-data reference values for the threat indicators.
struct Calibration {
  DatasetStats stats;
  double max_rec_loss = 0;
  std::shared_ptr<const Autoencoder> autoencoder;
  /// Empirical-rule indicators stay silent below this history length.
  std::size_t min_history = kDefaultMinHistory;
  /// Clamp every raw percentage change to [0, 1]; off passes raw values.
  bool clamp = true;

  /// Throws CalibrationError if any divisor is zero or the autoencoder is missing.
  void validate() const;
};

/// maxRecLossD: largest reconstruction loss over the training vectors.
double max_reconstruction_loss(const Autoencoder& ae, std::span<const FeatureVector> training);

struct IndicatorScores {
  double s1 = 0, s2 = 0, s3a = 0, s3b = 0, s4a = 0, s4b = 0;

  std::array<double, kIndicatorCount> as_array() const { return {s1, s2, s3a, s3b, s4a, s4b}; }
  static IndicatorScores from_array(const std::array<double, kIndicatorCount>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5]};
  }
  friend bool operator==(const IndicatorScores&, const IndicatorScores&) = default;
};

inline constexpr std::array<const char*, kIndicatorCount> kIndicatorNames{"s1", "s2", "s3a", "s3b", "s4a", "s4b"};

// Percentage-change forms. Each returns the raw value when `clamp` is false.

/// -(min_dist - avg_dist) / avg_dist
double distance_score(double min_dist, double avg_dist, bool clamp = true);
/// (max_shared - avg_shared) / avg_shared
double shared_score(double max_shared, double avg_shared, bool clamp = true);
/// (value - reference) / reference, used by the enabled-count and
/// reconstruction-loss indicators against training data.
double excess_score(double value, double reference, bool clamp = true);
/// (value - C) / C with C = mean + 3 stddev; 0 when C <= 0.
double empirical_rule_score(double value, double mean, double stddev, bool clamp = true);

// Indicators against a history. Empty history (s1, s2) or history shorter
// than `min_history` (s3b, s4b) yields 0.

double score_s1(const FeatureVector& q, const QueryHistory& history, const Calibration& calib);
double score_s2(const FeatureVector& q, const QueryHistory& history, const Calibration& calib);
double score_s3a(const FeatureVector& q, const Calibration& calib);
double score_s3b(const FeatureVector& q, const QueryHistory& history, std::size_t min_history, bool clamp = true);
double score_s4a(double rec_loss, const Calibration& calib);
double score_s4a(const FeatureVector& q, const Calibration& calib);
double score_s4b(double rec_loss, const QueryHistory& history, std::size_t min_history, bool clamp = true);

struct ScoredQuery {
  IndicatorScores scores;
  double rec_loss = 0;
};

/// All six indicators for `q` against the history as it stands, i.e. before
/// `q` itself is appended.
ScoredQuery compute_scores(const FeatureVector& q, const QueryHistory& history, const Calibration& calib);

}  // namespace malprotect
