#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "malprotect/feature_vector.hpp"

namespace malprotect {

using FamilyId = std::uint32_t;

struct Permission {
  bool addable = true;
  bool removable = true;
  friend bool operator==(const Permission&, const Permission&) = default;
};

/// Per-feature add/remove permissions. Every feature belongs to exactly one
/// family; a family is add+remove, add-only or frozen. Removable-but-not-
/// addable is rejected.
class FeatureFamilyTable {
 public:
  FeatureFamilyTable() = default;
  FeatureFamilyTable(std::vector<FamilyId> family_of, std::vector<Permission> permissions);

  /// One family, everything addable and removable.
  static FeatureFamilyTable permissive(std::size_t dim);

  /// Features assigned to `n_families` round-robin; permissions cycle through
  /// the Android manifest/dexcode pattern (hardware, requested permissions and
  /// intents add-only; used permissions frozen; the rest add+remove).
  /// `add_only` clears every removable flag.
  static FeatureFamilyTable round_robin(std::size_t dim, std::size_t n_families, bool add_only = false);

  std::size_t dim() const noexcept { return family_of_.size(); }
  std::size_t family_count() const noexcept { return permissions_.size(); }
  FamilyId family_of(FeatureIndex i) const { return family_of_.at(i); }
  const Permission& permission(FamilyId f) const { return permissions_.at(f); }
  const std::vector<FamilyId>& families() const noexcept { return family_of_; }
  const std::vector<Permission>& permissions() const noexcept { return permissions_; }

  bool can_add(FeatureIndex i) const { return permissions_[family_of_.at(i)].addable; }
  bool can_remove(FeatureIndex i) const { return permissions_[family_of_.at(i)].removable; }

  friend bool operator==(const FeatureFamilyTable&, const FeatureFamilyTable&) = default;

 private:
  std::vector<FamilyId> family_of_;
  std::vector<Permission> permissions_;
};

}  // namespace malprotect
