#include "malprotect/indicators.hpp"

#include <algorithm>

#include "malprotect/errors.hpp"

namespace malprotect {

namespace {

double bounded(double raw, bool clamp) { return clamp ? std::clamp(raw, 0.0, 1.0) : raw; }

}  // namespace

void Calibration::validate() const {
  if (!(stats.avg_dist > 0)) throw CalibrationError("avgDistD must be positive");
  if (!(stats.avg_shared > 0)) throw CalibrationError("avgSharedD must be positive");
  if (!(stats.avg_features > 0)) throw CalibrationError("avgFeaturesD must be positive");
  if (!(max_rec_loss > 0)) throw CalibrationError("maxRecLossD must be positive");
  if (!autoencoder) throw CalibrationError("calibration has no autoencoder");
  if (min_history == 0) throw CalibrationError("min_history must be positive");
}

double max_reconstruction_loss(const Autoencoder& ae, std::span<const FeatureVector> training) {
  double best = 0;
  for (const auto& v : training) best = std::max(best, ae.reconstruction_loss(v));
  return best;
}

double distance_score(double min_dist, double avg_dist, bool clamp) {
  return bounded(-(min_dist - avg_dist) / avg_dist, clamp);
}

double shared_score(double max_shared, double avg_shared, bool clamp) {
  return bounded((max_shared - avg_shared) / avg_shared, clamp);
}

double excess_score(double value, double reference, bool clamp) {
  return bounded((value - reference) / reference, clamp);
}

double empirical_rule_score(double value, double mean, double stddev, bool clamp) {
  const double c = mean + 3.0 * stddev;
  if (!(c > 0)) return 0.0;
  return bounded((value - c) / c, clamp);
}

double score_s1(const FeatureVector& q, const QueryHistory& history, const Calibration& calib) {
  if (history.empty()) return 0.0;
  return distance_score(double(history.scan(q).min_distance), calib.stats.avg_dist, calib.clamp);
}

double score_s2(const FeatureVector& q, const QueryHistory& history, const Calibration& calib) {
  if (history.empty()) return 0.0;
  return shared_score(double(history.scan(q).max_shared), calib.stats.avg_shared, calib.clamp);
}

double score_s3a(const FeatureVector& q, const Calibration& calib) {
  return excess_score(double(q.enabled_count()), calib.stats.avg_features, calib.clamp);
}

double score_s3b(const FeatureVector& q, const QueryHistory& history, std::size_t min_history, bool clamp) {
  if (history.size() < min_history || history.empty()) return 0.0;
  const MeanStd s = history.enabled_count_stats();
  return empirical_rule_score(double(q.enabled_count()), s.mean, s.stddev, clamp);
}

double score_s4a(double rec_loss, const Calibration& calib) {
  return excess_score(rec_loss, calib.max_rec_loss, calib.clamp);
}

double score_s4a(const FeatureVector& q, const Calibration& calib) {
  if (!calib.autoencoder) throw CalibrationError("calibration has no autoencoder");
  return score_s4a(calib.autoencoder->reconstruction_loss(q), calib);
}

double score_s4b(double rec_loss, const QueryHistory& history, std::size_t min_history, bool clamp) {
  if (history.size() < min_history || history.empty()) return 0.0;
  const MeanStd s = history.rec_loss_stats();
  return empirical_rule_score(rec_loss, s.mean, s.stddev, clamp);
}

ScoredQuery compute_scores(const FeatureVector& q, const QueryHistory& history, const Calibration& calib) {
  if (!calib.autoencoder) throw CalibrationError("calibration has no autoencoder");
  ScoredQuery out;
  out.rec_loss = calib.autoencoder->reconstruction_loss(q);
  auto& s = out.scores;
  if (!history.empty()) {
    const NeighborSummary n = history.scan(q);
    s.s1 = distance_score(double(n.min_distance), calib.stats.avg_dist, calib.clamp);
    s.s2 = shared_score(double(n.max_shared), calib.stats.avg_shared, calib.clamp);
  }
  s.s3a = score_s3a(q, calib);
  s.s3b = score_s3b(q, history, calib.min_history, calib.clamp);
  s.s4a = score_s4a(out.rec_loss, calib);
  s.s4b = score_s4b(out.rec_loss, history, calib.min_history, calib.clamp);
  return out;
}

}  // namespace malprotect
