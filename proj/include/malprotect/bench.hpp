#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "malprotect/metrics.hpp"
#include "malprotect/pipeline.hpp"

namespace malprotect {

struct TimingRow {
  std::size_t q_size = 0;
  double worst_case_seconds = 0;
  std::size_t bytes = 0;
};

struct TimingReport {
  std::string defense;
  std::vector<TimingRow> rows;
  LinearFit time_fit;
  LinearFit bytes_fit;
};

/// Per history size: an oracle whose history holds exactly q entries (filled
/// from training vectors), one warm-up batch, then `repeats` timed batches of
/// `predictions` queries; the worst single prediction of each batch is kept
/// and the smallest of those reported. Storage is the serialized history
/// size. Allocation failure surfaces as ResourceError.
TimingReport bench_costs(const Artifacts& artifacts, const ExperimentConfig& config, const std::string& defense,
                         std::span<const std::size_t> q_grid);

void write_bench_csv(const std::filesystem::path& path, std::span<const TimingReport> reports);

}  // namespace malprotect
