#include "malprotect/bench.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <new>

#include "malprotect/errors.hpp"
#include "malprotect/experiments.hpp"

namespace malprotect {

namespace {

double worst_prediction_seconds(Oracle& oracle, std::span<const FeatureVector> queries, std::size_t count,
                                std::size_t offset) {
  using clock = std::chrono::steady_clock;
  double worst = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& q = queries[(offset + i) % queries.size()];
    const auto t0 = clock::now();
    oracle.predict(q);
    const auto t1 = clock::now();
    worst = std::max(worst, std::chrono::duration<double>(t1 - t0).count());
  }
  return worst;
}

}  // namespace

TimingReport bench_costs(const Artifacts& artifacts, const ExperimentConfig& config, const std::string& defense,
                         std::span<const std::size_t> q_grid) {
  if (q_grid.empty() || !std::is_sorted(q_grid.begin(), q_grid.end())) throw ConfigError("q grid must be ascending");
  const auto training = artifacts.dataset.vectors(Split::train);
  const auto queries = artifacts.dataset.vectors(Split::test);
  if (training.empty() || queries.empty()) throw ConfigError("benchmark needs training and test vectors");

  TimingReport report;
  report.defense = defense;
  try {
    for (std::size_t q : q_grid) {
      ExperimentConfig local = config;
      local.history_capacity = q;
      auto oracle = make_oracle(defense, config.models.empty() ? "mlp" : config.models.front(), artifacts, local);
      for (std::size_t i = 0; i < q; ++i) oracle->remember(training[i % training.size()]);

      worst_prediction_seconds(*oracle, queries, config.bench_predictions, 0);
      std::vector<double> maxima;
      for (std::size_t r = 0; r < config.bench_repeats; ++r)
        maxima.push_back(
            worst_prediction_seconds(*oracle, queries, config.bench_predictions, (r + 1) * config.bench_predictions));
      // Smallest batch maximum: a preempted batch only ever inflates its max.
      report.rows.push_back({q, *std::min_element(maxima.begin(), maxima.end()),
                             oracle->history().serialized_bytes()});
    }
  } catch (const std::bad_alloc&) {
    throw ResourceError("out of memory while filling a history for the benchmark");
  }

  if (report.rows.size() >= 2) {
    std::vector<double> x, t, b;
    for (const auto& r : report.rows) {
      x.push_back(double(r.q_size));
      t.push_back(r.worst_case_seconds);
      b.push_back(double(r.bytes));
    }
    report.time_fit = linear_fit(x, t);
    report.bytes_fit = linear_fit(x, b);
  }
  return report;
}

void write_bench_csv(const std::filesystem::path& path, std::span<const TimingReport> reports) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ArtifactError("cannot write " + path.string());
  out << "defense,q_size,worst_case_seconds,bytes\n";
  for (const auto& rep : reports)
    for (const auto& r : rep.rows)
      out << rep.defense << ',' << r.q_size << ',' << format_real(r.worst_case_seconds, 9) << ',' << r.bytes << '\n';
}

}  // namespace malprotect
