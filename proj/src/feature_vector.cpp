#include "malprotect/feature_vector.hpp"

#include <algorithm>
#include <string>

#include "malprotect/errors.hpp"

namespace malprotect {

namespace {

void require_same_dim(const FeatureVector& a, const FeatureVector& b) {
  if (a.dim() != b.dim())
    throw DimensionMismatch("feature vectors have dimensions " + std::to_string(a.dim()) + " and " +
                            std::to_string(b.dim()));
}

}  // namespace

FeatureVector::FeatureVector(std::size_t dim) : dim_(dim) {}

FeatureVector::FeatureVector(std::size_t dim, std::vector<FeatureIndex> enabled)
    : dim_(dim), enabled_(std::move(enabled)) {
  std::sort(enabled_.begin(), enabled_.end());
  if (std::adjacent_find(enabled_.begin(), enabled_.end()) != enabled_.end())
    throw DimensionMismatch("duplicate feature index");
  if (!enabled_.empty() && enabled_.back() >= dim_)
    throw DimensionMismatch("feature index " + std::to_string(enabled_.back()) + " outside dimension " +
                            std::to_string(dim_));
}

bool FeatureVector::test(FeatureIndex i) const {
  if (i >= dim_) throw DimensionMismatch("feature index " + std::to_string(i) + " outside dimension");
  return std::binary_search(enabled_.begin(), enabled_.end(), i);
}

bool FeatureVector::set(FeatureIndex i) {
  if (i >= dim_) throw DimensionMismatch("feature index " + std::to_string(i) + " outside dimension");
  auto it = std::lower_bound(enabled_.begin(), enabled_.end(), i);
  if (it != enabled_.end() && *it == i) return false;
  enabled_.insert(it, i);
  return true;
}

bool FeatureVector::reset(FeatureIndex i) {
  if (i >= dim_) throw DimensionMismatch("feature index " + std::to_string(i) + " outside dimension");
  auto it = std::lower_bound(enabled_.begin(), enabled_.end(), i);
  if (it == enabled_.end() || *it != i) return false;
  enabled_.erase(it);
  return true;
}

Eigen::VectorXd FeatureVector::to_dense() const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
  for (FeatureIndex i : enabled_) out(i) = 1.0;
  return out;
}

void FeatureVector::pack_into(std::span<Word> words) const {
  std::fill(words.begin(), words.end(), Word{0});
  for (FeatureIndex i : enabled_) words[i / kWordBits] |= Word{1} << (i % kWordBits);
}

std::size_t shared_enabled(const FeatureVector& a, const FeatureVector& b) {
  require_same_dim(a, b);
  auto x = a.enabled();
  auto y = b.enabled();
  std::size_t i = 0, j = 0, shared = 0;
  while (i < x.size() && j < y.size()) {
    if (x[i] < y[j]) {
      ++i;
    } else if (y[j] < x[i]) {
      ++j;
    } else {
      ++shared;
      ++i;
      ++j;
    }
  }
  return shared;
}

std::size_t l0_distance(const FeatureVector& a, const FeatureVector& b) {
  const std::size_t shared = shared_enabled(a, b);
  return a.enabled_count() + b.enabled_count() - 2 * shared;
}

}  // namespace malprotect
