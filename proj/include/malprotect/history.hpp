#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "malprotect/feature_vector.hpp"

namespace malprotect {

inline constexpr std::size_t kDefaultHistoryCapacity = 10'000;

struct HistoryEntry {
  FeatureVector vector;
  std::size_t enabled_count = 0;
  double rec_loss = 0;
};

struct MeanStd {
  double mean = 0;
  double stddev = 0;  ///< population standard deviation
};

struct NeighborSummary {
  std::size_t min_distance = std::numeric_limits<std::size_t>::max();
  std::size_t max_shared = 0;
};

/// Fixed-capacity sliding window of past queries, oldest evicted first.
/// Alongside the sparse vectors it keeps a packed-bit copy of each entry in a
/// ring buffer for popcount scans, and running sums for the mean and spread
/// of enabled counts and reconstruction losses.
class QueryHistory {
 public:
  QueryHistory(std::size_t dim, std::size_t capacity = kDefaultHistoryCapacity);

  void append(FeatureVector vector, double rec_loss);
  void clear();

  std::size_t dim() const noexcept { return dim_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  /// Oldest first.
  const std::deque<HistoryEntry>& entries() const noexcept { return entries_; }

  /// Minimum L0 distance and maximum shared-enabled count of `q` against all
  /// entries, in one pass over the packed bits. Empty history gives the
  /// default-constructed summary.
  NeighborSummary scan(const FeatureVector& q) const;
  /// L0 distance of `q` to every entry, oldest first.
  std::vector<std::uint32_t> distances(const FeatureVector& q) const;
  /// True when some entry is at L0 distance below `threshold`; stops early.
  bool any_within(const FeatureVector& q, std::size_t threshold) const;

  MeanStd enabled_count_stats() const;
  MeanStd rec_loss_stats() const;

  /// Compact binary encoding: per entry a u32 count, u32 indices and an f64
  /// loss, after a small header.
  void serialize(std::ostream& out) const;
  std::size_t serialized_bytes() const;

 private:
  std::span<const Word> slot(std::size_t ring_index) const {
    return {bits_.data() + ring_index * words_, words_};
  }
  std::vector<Word> pack_query(const FeatureVector& q) const;

  std::size_t dim_;
  std::size_t capacity_;
  std::size_t words_;
  std::deque<HistoryEntry> entries_;
  std::vector<Word> bits_;   // ring of capacity slots, grown lazily
  std::size_t head_ = 0;     // ring index of the oldest entry
  std::int64_t count_sum_ = 0;
  std::int64_t count_sq_sum_ = 0;
  long double loss_sum_ = 0;
  long double loss_sq_sum_ = 0;
};

}  // namespace malprotect
