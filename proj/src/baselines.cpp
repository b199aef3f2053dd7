#include "malprotect/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "malprotect/errors.hpp"

namespace malprotect {

// ---- L0 ----------------------------------------------------------------------

bool l0_check(const FeatureVector& q, const QueryHistory& history, std::size_t threshold) {
  return history.any_within(q, threshold);
}

L0Oracle::L0Oracle(std::shared_ptr<const PredictionModel> model, std::size_t dim, std::size_t threshold,
                   std::size_t history_capacity)
    : Oracle("l0", std::move(model), dim, history_capacity), threshold_(threshold) {
  if (threshold_ == 0) throw ConfigError("L0 threshold must be at least 1");
}

Oracle::Inspection L0Oracle::inspect(const FeatureVector& q) { return {l0_check(q, history(), threshold_), {}, 0}; }

// ---- SD ------------------------------------------------------------------------

double percentile_of(std::vector<double> values, double percent) {
  if (values.empty()) throw CalibrationError("percentile of an empty sample");
  if (!(percent >= 0 && percent <= 100)) throw ConfigError("percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = double(values.size() - 1) * percent / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - double(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {

double mean_of_k_smallest(std::vector<std::uint32_t>& d, std::size_t k) {
  std::nth_element(d.begin(), d.begin() + std::ptrdiff_t(k - 1), d.end());
  double sum = 0;
  for (std::size_t i = 0; i < k; ++i) sum += d[i];
  return sum / double(k);
}

}  // namespace

std::vector<double> mean_knn_distances(std::span<const FeatureVector> vectors, std::size_t k) {
  const std::size_t n = vectors.size();
  if (k == 0) throw ConfigError("k must be positive");
  if (n <= k) throw CalibrationError("need more than k vectors for k-nearest-neighbour distances");
  const std::size_t dim = vectors.front().dim();
  const std::size_t words = words_for(dim);
  std::vector<Word> packed(n * words);
  for (std::size_t i = 0; i < n; ++i) {
    if (vectors[i].dim() != dim) throw DimensionMismatch("vectors differ in dimension");
    vectors[i].pack_into(std::span<Word>(packed.data() + i * words, words));
  }
  // Symmetric distance matrix, upper triangle computed once.
  std::vector<std::uint32_t> dist(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const Word> a(packed.data() + i * words, words);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto d = static_cast<std::uint32_t>(popcount_xor(a, std::span<const Word>(packed.data() + j * words, words)));
      dist[i * n + j] = dist[j * n + i] = d;
    }
  }
  std::vector<double> out(n);
  std::vector<std::uint32_t> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) row.push_back(dist[i * n + j]);
    out[i] = mean_of_k_smallest(row, k);
  }
  return out;
}

SdThreshold sd_calibrate(std::span<const FeatureVector> training, std::size_t k, double percentile) {
  return {k, percentile, percentile_of(mean_knn_distances(training, k), percentile)};
}

bool sd_check(const FeatureVector& q, const QueryHistory& history, std::size_t k, double threshold) {
  if (k == 0 || history.size() < k) return false;
  auto d = history.distances(q);
  return mean_of_k_smallest(d, k) < threshold;
}

nlohmann::json sd_threshold_to_json(const SdThreshold& t) {
  return {{"k", t.k}, {"percentile", t.percentile}, {"threshold", t.threshold}};
}

SdThreshold sd_threshold_from_json(const nlohmann::json& j) {
  try {
    return {j.at("k").get<std::size_t>(), j.at("percentile").get<double>(), j.at("threshold").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(std::string("invalid SD threshold artifact: ") + e.what());
  }
}

SdOracle::SdOracle(std::shared_ptr<const PredictionModel> model, std::size_t dim, SdThreshold threshold,
                   std::size_t history_capacity)
    : Oracle("sd", std::move(model), dim, history_capacity), threshold_(threshold) {
  if (threshold_.k == 0) throw ConfigError("SD k must be positive");
  if (!(threshold_.threshold >= 0)) throw CalibrationError("SD threshold must be nonnegative");
}

Oracle::Inspection SdOracle::inspect(const FeatureVector& q) {
  return {sd_check(q, history(), threshold_.k, threshold_.threshold), {}, 0};
}

// ---- PRADA ---------------------------------------------------------------------

PradaState::PradaState(std::size_t dim, double delta) : dim_(dim), words_(words_for(dim)), delta_(delta) {
  if (!(delta > 0 && delta < 1)) throw ConfigError("PRADA delta must lie in (0, 1)");
}

void PradaState::reset() {
  for (auto& g : growing_) g.clear();
  grown_ = {0, 0};
  dmins_.clear();
  dmin_sum_ = dmin_sq_sum_ = 0;
  flagged_ = false;
  last_w_ = std::numeric_limits<double>::quiet_NaN();
}

bool prada_update(PradaState& s, const FeatureVector& q, Label predicted, const QueryHistory& history) {
  if (q.dim() != s.dim_) throw DimensionMismatch("PRADA query dimension mismatch");
  std::vector<Word> packed(s.words_);
  q.pack_into(packed);

  auto& growing = s.growing_[to_int(predicted)];
  auto& grown = s.grown_[to_int(predicted)];
  double dmin;
  bool admit;
  if (grown == 0) {
    dmin = history.empty() ? double(q.enabled_count()) : double(history.scan(q).min_distance);
    admit = true;
  } else {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (std::size_t g = 0; g < grown; ++g)
      best = std::min(best, popcount_xor(packed, std::span<const Word>(growing.data() + g * s.words_, s.words_)));
    dmin = double(best);
    if (s.dmins_.empty()) {
      admit = true;
    } else {
      const double n = double(s.dmins_.size());
      const double mean = s.dmin_sum_ / n;
      const double stdev = std::sqrt(std::max(0.0, s.dmin_sq_sum_ / n - mean * mean));
      admit = dmin > mean - stdev;
    }
  }
  if (admit) {
    growing.insert(growing.end(), packed.begin(), packed.end());
    ++grown;
  }
  s.dmins_.push_back(dmin);
  s.dmin_sum_ += dmin;
  s.dmin_sq_sum_ += dmin * dmin;

  if (s.dmins_.size() >= kPradaWarmup) {
    const std::size_t n = std::min(s.dmins_.size(), kShapiroMax);
    const std::span<const double> window(s.dmins_.data() + (s.dmins_.size() - n), n);
    const auto [lo, hi] = std::minmax_element(window.begin(), window.end());
    if (*lo == *hi) {
      // A perfectly repetitive stream of minima is as far from the natural
      // spread of benign traffic as a sample can get.
      s.last_w_ = 0;
    } else {
      s.last_w_ = shapiro_wilk(window);
    }
    if (s.last_w_ < s.delta_) s.flagged_ = true;
  }
  return s.flagged_;
}

PradaOracle::PradaOracle(std::shared_ptr<const PredictionModel> model, std::size_t dim, double delta,
                         std::size_t history_capacity)
    : Oracle("prada", std::move(model), dim, history_capacity), state_(dim, delta) {}

Oracle::Inspection PradaOracle::inspect(const FeatureVector& q) {
  const bool flagged = prada_update(state_, q, model().predict_label(q), history());
  if (session_log_) {
    nlohmann::json line{{"dmin", state_.dmin_values().back()}, {"flagged", flagged}};
    line["w"] = std::isnan(state_.last_w()) ? nlohmann::json(nullptr) : nlohmann::json(state_.last_w());
    *session_log_ << line.dump() << '\n';
  }
  return {flagged, {}, 0};
}

}  // namespace malprotect
