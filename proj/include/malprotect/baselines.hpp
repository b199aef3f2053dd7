#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include <json.hpp>

#include "malprotect/feature_vector.hpp"
#include "malprotect/history.hpp"
#include "malprotect/oracle.hpp"

namespace malprotect {

// ---- Shapiro-Wilk ----------------------------------------------------------

/// W statistic of the Shapiro-Wilk normality test (Royston's approximation of
/// the coefficients). Throws UndefinedStatistic unless 3 <= n <= 5000 and the
/// sample has nonzero spread.
double shapiro_wilk(std::span<const double> samples);

/// Coefficients a_1..a_{n/2} for sample size n, cached.
const std::vector<double>& shapiro_wilk_coefficients(std::size_t n);

inline constexpr std::size_t kShapiroMax = 5000;

// ---- L0 similarity ---------------------------------------------------------

inline constexpr std::size_t kDefaultL0Threshold = 10;

/// Attack iff some history entry lies at L0 distance strictly below `threshold`.
bool l0_check(const FeatureVector& q, const QueryHistory& history, std::size_t threshold = kDefaultL0Threshold);

class L0Oracle final : public Oracle {
 public:
  L0Oracle(std::shared_ptr<const PredictionModel> model, std::size_t dim, std::size_t threshold = kDefaultL0Threshold,
           std::size_t history_capacity = kDefaultHistoryCapacity);
  std::size_t threshold() const noexcept { return threshold_; }

 protected:
  Inspection inspect(const FeatureVector& q) override;

 private:
  std::size_t threshold_;
};

// ---- Stateful Detection (k nearest neighbours) -----------------------------

inline constexpr std::size_t kDefaultSdK = 50;
inline constexpr double kDefaultSdPercentile = 0.1;

struct SdThreshold {
  std::size_t k = kDefaultSdK;
  double percentile = kDefaultSdPercentile;  ///< in percent
  double threshold = 0;
};

/// Linear-interpolated percentile (0..100) of unsorted values.
double percentile_of(std::vector<double> values, double percent);

/// Mean L0 distance of each vector to its k nearest others.
std::vector<double> mean_knn_distances(std::span<const FeatureVector> vectors, std::size_t k);

/// Throws CalibrationError when |training| <= k.
SdThreshold sd_calibrate(std::span<const FeatureVector> training, std::size_t k = kDefaultSdK,
                         double percentile = kDefaultSdPercentile);

/// False while the history holds fewer than k entries; otherwise attack iff the
/// mean distance to the k nearest entries is strictly below the threshold.
bool sd_check(const FeatureVector& q, const QueryHistory& history, std::size_t k, double threshold);

nlohmann::json sd_threshold_to_json(const SdThreshold& t);
SdThreshold sd_threshold_from_json(const nlohmann::json& j);

class SdOracle final : public Oracle {
 public:
  SdOracle(std::shared_ptr<const PredictionModel> model, std::size_t dim, SdThreshold threshold,
           std::size_t history_capacity = kDefaultHistoryCapacity);
  const SdThreshold& threshold() const noexcept { return threshold_; }

 protected:
  Inspection inspect(const FeatureVector& q) override;

 private:
  SdThreshold threshold_;
};

// ---- PRADA ------------------------------------------------------------------

inline constexpr double kDefaultPradaDelta = 0.9;
inline constexpr std::size_t kPradaWarmup = 30;

/// PRADA detector state with L0 in place of L2. Queries whose minimum
/// distance to their class's growing set exceeds mean - stdev of past minima join the
/// set; once 30 minima exist the detector flags when their Shapiro-Wilk W
/// drops below delta. The flag stays set until reset().
class PradaState {
 public:
  explicit PradaState(std::size_t dim, double delta = kDefaultPradaDelta);

  void reset();

  double delta() const noexcept { return delta_; }
  bool attack_flagged() const noexcept { return flagged_; }
  const std::vector<double>& dmin_values() const noexcept { return dmins_; }
  /// Members across both per-class growing sets.
  std::size_t growing_set_size() const noexcept { return grown_[0] + grown_[1]; }
  /// W from the most recent test; NaN before warm-up ends.
  double last_w() const noexcept { return last_w_; }

 private:
  friend bool prada_update(PradaState& state, const FeatureVector& q, Label predicted, const QueryHistory& history);

  std::size_t dim_;
  std::size_t words_;
  double delta_;
  std::array<std::vector<Word>, 2> growing_;  // packed members, one set per predicted class
  std::array<std::size_t, 2> grown_{0, 0};
  std::vector<double> dmins_;
  double dmin_sum_ = 0;
  double dmin_sq_sum_ = 0;
  bool flagged_ = false;
  double last_w_ = std::numeric_limits<double>::quiet_NaN();
};

/// Processes one query the model labelled `predicted`; returns the (sticky)
/// attack flag. Distances are taken to the growing set of that class. The
/// first query of a class in a session measures against the shared history
/// instead (or its own enabled count when that is empty too).
bool prada_update(PradaState& state, const FeatureVector& q, Label predicted, const QueryHistory& history);

class PradaOracle final : public Oracle {
 public:
  PradaOracle(std::shared_ptr<const PredictionModel> model, std::size_t dim, double delta = kDefaultPradaDelta,
              std::size_t history_capacity = kDefaultHistoryCapacity);

  void begin_session() override { state_.reset(); }
  const PradaState& state() const noexcept { return state_; }
  /// JSON-lines of dmin and W per query; nullptr disables.
  void set_session_log(std::ostream* log) { session_log_ = log; }

 protected:
  Inspection inspect(const FeatureVector& q) override;

 private:
  PradaState state_;
  std::ostream* session_log_ = nullptr;
};

}  // namespace malprotect
