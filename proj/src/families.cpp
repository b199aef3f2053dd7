#include "malprotect/families.hpp"

#include <array>
#include <string>

#include "malprotect/errors.hpp"

namespace malprotect {

namespace {

// S1 hardware, S2 requested permissions, S3 app components, S4 intents,
// S5 restricted API calls, S6 used permissions, S7 suspicious API calls,
// S8 network addresses.
constexpr std::array<Permission, 8> kAndroidPattern{{
    {true, false},
    {true, false},
    {true, true},
    {true, false},
    {true, true},
    {false, false},
    {true, true},
    {true, true},
}};

}  // namespace

FeatureFamilyTable::FeatureFamilyTable(std::vector<FamilyId> family_of, std::vector<Permission> permissions)
    : family_of_(std::move(family_of)), permissions_(std::move(permissions)) {
  if (family_of_.empty()) throw ConfigError("family table needs at least one feature");
  for (FamilyId f : family_of_)
    if (f >= permissions_.size()) throw ConfigError("feature mapped to unknown family " + std::to_string(f));
  for (const Permission& p : permissions_)
    if (p.removable && !p.addable) throw ConfigError("removable-but-not-addable family is not a valid pattern");
}

FeatureFamilyTable FeatureFamilyTable::permissive(std::size_t dim) {
  return FeatureFamilyTable(std::vector<FamilyId>(dim, 0), {Permission{true, true}});
}

FeatureFamilyTable FeatureFamilyTable::round_robin(std::size_t dim, std::size_t n_families, bool add_only) {
  if (n_families == 0 || n_families > dim) throw ConfigError("need 1 <= n_families <= dim");
  std::vector<FamilyId> family_of(dim);
  for (std::size_t i = 0; i < dim; ++i) family_of[i] = static_cast<FamilyId>(i % n_families);
  std::vector<Permission> permissions(n_families);
  for (std::size_t f = 0; f < n_families; ++f) {
    permissions[f] = kAndroidPattern[f % kAndroidPattern.size()];
    if (add_only) permissions[f].removable = false;
  }
  return FeatureFamilyTable(std::move(family_of), std::move(permissions));
}

}  // namespace malprotect
