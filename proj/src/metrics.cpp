#include "malprotect/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "malprotect/errors.hpp"

namespace malprotect {

void Confusion::add(Label truth, Label predicted) {
  if (truth == Label::malware)
    ++(predicted == Label::malware ? tp : fn);
  else
    ++(predicted == Label::malware ? fp : tn);
}

double accuracy(const Confusion& c) { return c.total() ? double(c.tp + c.tn) / double(c.total()) : 0.0; }

double false_positive_rate(const Confusion& c) { return c.fp + c.tn ? double(c.fp) / double(c.fp + c.tn) : 0.0; }

double f1_score(const Confusion& c) {
  const std::size_t denom = 2 * c.tp + c.fp + c.fn;
  return denom ? 2.0 * double(c.tp) / double(denom) : 0.0;
}

namespace {

void check_sizes(std::span<const double> scores, std::span<const Label> truth) {
  if (scores.size() != truth.size()) throw ConfigError("scores and labels differ in length");
}

}  // namespace

double rank_auc(std::span<const double> scores, std::span<const Label> truth) {
  check_sizes(scores, truth);
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos_rank_sum = 0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double midrank = (double(i + 1) + double(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (truth[idx[k]] == Label::malware) {
        pos_rank_sum += midrank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ConfigError("AUC needs both classes");
  return (pos_rank_sum - double(n_pos) * double(n_pos + 1) / 2.0) / (double(n_pos) * double(n_neg));
}

double pairwise_auc(std::span<const double> scores, std::span<const Label> truth) {
  check_sizes(scores, truth);
  double wins = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (truth[i] != Label::malware) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (truth[j] != Label::benign) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  if (pairs == 0) throw ConfigError("AUC needs both classes");
  return wins / double(pairs);
}

MetricsReport compute_metrics(std::span<const Label> truth, std::span<const Label> predicted,
                              std::span<const double> scores) {
  if (truth.size() != predicted.size()) throw ConfigError("truth and predictions differ in length");
  MetricsReport r;
  for (std::size_t i = 0; i < truth.size(); ++i) r.counts.add(truth[i], predicted[i]);
  r.accuracy = accuracy(r.counts);
  r.fpr = false_positive_rate(r.counts);
  r.f1 = f1_score(r.counts);
  r.auc = rank_auc(scores, truth);
  return r;
}

double median_or_minus_one(std::vector<std::size_t> values) {
  if (values.empty()) return -1;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? double(values[n / 2]) : (double(values[n / 2 - 1]) + double(values[n / 2])) / 2.0;
}

double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double stdev_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / double(v.size() - 1));
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("linear fit needs at least two paired points");
  const double mx = mean_of(x), my = mean_of(y);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0)) throw ConfigError("linear fit needs distinct x values");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

}  // namespace malprotect
