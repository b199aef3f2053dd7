#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace malprotect {

using FeatureIndex = std::uint32_t;
using Word = std::uint64_t;

inline constexpr std::size_t kWordBits = 64;

constexpr std::size_t words_for(std::size_t dim) { return (dim + kWordBits - 1) / kWordBits; }

/// Binary feature vector over `dim` features, stored as the sorted set of
/// enabled indices. Malware feature vectors are sparse, so this is the
/// canonical representation; `pack_into` produces a word-level view for
/// popcount scans.
class FeatureVector {
 public:
  FeatureVector() = default;
  explicit FeatureVector(std::size_t dim);
  /// Indices may arrive unsorted; duplicates or indices >= dim throw.
  FeatureVector(std::size_t dim, std::vector<FeatureIndex> enabled);

  /// Bits are taken as `value >= 0.5`.
  template <typename Derived>
  static FeatureVector from_dense(const Eigen::MatrixBase<Derived>& values) {
    FeatureVector v(static_cast<std::size_t>(values.size()));
    for (Eigen::Index i = 0; i < values.size(); ++i)
      if (values(i) >= 0.5) v.enabled_.push_back(static_cast<FeatureIndex>(i));
    return v;
  }

  std::size_t dim() const noexcept { return dim_; }
  std::span<const FeatureIndex> enabled() const noexcept { return enabled_; }
  std::size_t enabled_count() const noexcept { return enabled_.size(); }

  bool test(FeatureIndex i) const;
  /// Returns true when the bit changed.
  bool set(FeatureIndex i);
  bool reset(FeatureIndex i);

  Eigen::VectorXd to_dense() const;
  void pack_into(std::span<Word> words) const;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<FeatureIndex> enabled_;
};

/// Number of positions where the vectors differ (symmetric difference size).
std::size_t l0_distance(const FeatureVector& a, const FeatureVector& b);

/// Number of features enabled in both vectors.
std::size_t shared_enabled(const FeatureVector& a, const FeatureVector& b);

inline std::size_t popcount_xor(std::span<const Word> a, std::span<const Word> b) noexcept {
  std::size_t sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += static_cast<std::size_t>(__builtin_popcountll(a[i] ^ b[i]));
  return sum;
}

inline std::size_t popcount_and(std::span<const Word> a, std::span<const Word> b) noexcept {
  std::size_t sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += static_cast<std::size_t>(__builtin_popcountll(a[i] & b[i]));
  return sum;
}

}  // namespace malprotect
