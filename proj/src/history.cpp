#include "malprotect/history.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "malprotect/errors.hpp"

namespace malprotect {

QueryHistory::QueryHistory(std::size_t dim, std::size_t capacity)
    : dim_(dim), capacity_(capacity), words_(words_for(dim)) {
  if (capacity_ == 0) throw ConfigError("history capacity must be positive");
  if (dim_ == 0) throw ConfigError("history dimension must be positive");
}

void QueryHistory::clear() {
  entries_.clear();
  bits_.clear();
  head_ = 0;
  count_sum_ = count_sq_sum_ = 0;
  loss_sum_ = loss_sq_sum_ = 0;
}

void QueryHistory::append(FeatureVector vector, double rec_loss) {
  if (vector.dim() != dim_) throw DimensionMismatch("history entry dimension mismatch");
  if (entries_.size() == capacity_) {
    const HistoryEntry& old = entries_.front();
    const auto c = static_cast<std::int64_t>(old.enabled_count);
    count_sum_ -= c;
    count_sq_sum_ -= c * c;
    loss_sum_ -= old.rec_loss;
    loss_sq_sum_ -= static_cast<long double>(old.rec_loss) * old.rec_loss;
    entries_.pop_front();
    head_ = (head_ + 1) % capacity_;
  }
  const std::size_t ring = (head_ + entries_.size()) % capacity_;
  if (bits_.size() < (ring + 1) * words_) bits_.resize((ring + 1) * words_);
  vector.pack_into(std::span<Word>(bits_.data() + ring * words_, words_));

  const auto c = static_cast<std::int64_t>(vector.enabled_count());
  count_sum_ += c;
  count_sq_sum_ += c * c;
  loss_sum_ += rec_loss;
  loss_sq_sum_ += static_cast<long double>(rec_loss) * rec_loss;
  entries_.push_back({std::move(vector), static_cast<std::size_t>(c), rec_loss});
}

std::vector<Word> QueryHistory::pack_query(const FeatureVector& q) const {
  if (q.dim() != dim_) throw DimensionMismatch("query dimension differs from history");
  std::vector<Word> packed(words_);
  q.pack_into(packed);
  return packed;
}

NeighborSummary QueryHistory::scan(const FeatureVector& q) const {
  const auto packed = pack_query(q);
  NeighborSummary out;
  const std::size_t n = entries_.size();
  for (std::size_t k = 0; k < n; ++k) {
    const auto s = slot((head_ + k) % capacity_);
    out.min_distance = std::min(out.min_distance, popcount_xor(packed, s));
    out.max_shared = std::max(out.max_shared, popcount_and(packed, s));
  }
  return out;
}

std::vector<std::uint32_t> QueryHistory::distances(const FeatureVector& q) const {
  const auto packed = pack_query(q);
  std::vector<std::uint32_t> out(entries_.size());
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = static_cast<std::uint32_t>(popcount_xor(packed, slot((head_ + k) % capacity_)));
  return out;
}

bool QueryHistory::any_within(const FeatureVector& q, std::size_t threshold) const {
  const auto packed = pack_query(q);
  for (std::size_t k = 0; k < entries_.size(); ++k)
    if (popcount_xor(packed, slot((head_ + k) % capacity_)) < threshold) return true;
  return false;
}

MeanStd QueryHistory::enabled_count_stats() const {
  if (entries_.empty()) return {};
  const auto n = static_cast<long double>(entries_.size());
  const long double mean = static_cast<long double>(count_sum_) / n;
  const long double var = std::max<long double>(0, static_cast<long double>(count_sq_sum_) / n - mean * mean);
  return {static_cast<double>(mean), static_cast<double>(std::sqrt(var))};
}

MeanStd QueryHistory::rec_loss_stats() const {
  if (entries_.empty()) return {};
  const auto n = static_cast<long double>(entries_.size());
  const long double mean = loss_sum_ / n;
  const long double var = std::max<long double>(0, loss_sq_sum_ / n - mean * mean);
  return {static_cast<double>(mean), static_cast<double>(std::sqrt(var))};
}

void QueryHistory::serialize(std::ostream& out) const {
  auto put_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
  put_u32(static_cast<std::uint32_t>(dim_));
  put_u32(static_cast<std::uint32_t>(entries_.size()));
  for (const auto& e : entries_) {
    put_u32(static_cast<std::uint32_t>(e.enabled_count));
    out.write(reinterpret_cast<const char*>(e.vector.enabled().data()),
              static_cast<std::streamsize>(e.vector.enabled().size() * sizeof(FeatureIndex)));
    out.write(reinterpret_cast<const char*>(&e.rec_loss), sizeof e.rec_loss);
  }
}

std::size_t QueryHistory::serialized_bytes() const {
  std::size_t bytes = 2 * sizeof(std::uint32_t);
  for (const auto& e : entries_)
    bytes += sizeof(std::uint32_t) + e.vector.enabled_count() * sizeof(FeatureIndex) + sizeof(double);
  return bytes;
}

}  // namespace malprotect
