#include "malprotect/perturb.hpp"

#include "malprotect/errors.hpp"

namespace malprotect {

FeatureVector validate_perturbations(const FeatureVector& original, const FeatureVector& perturbed,
                                     const FeatureFamilyTable& table) {
  if (original.dim() != perturbed.dim() || original.dim() != table.dim())
    throw DimensionMismatch("validate_perturbations needs equal dimensions for vectors and family table");

  auto a = original.enabled();
  auto b = perturbed.enabled();
  std::vector<FeatureIndex> out;
  out.reserve(a.size() + b.size());
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i] < b[j])) {
      // removal
      if (!table.can_remove(a[i])) out.push_back(a[i]);
      ++i;
    } else if (i == a.size() || b[j] < a[i]) {
      // addition
      if (table.can_add(b[j])) out.push_back(b[j]);
      ++j;
    } else {
      out.push_back(a[i]);
      ++i;
      ++j;
    }
  }
  return FeatureVector(original.dim(), std::move(out));
}

FeatureVector discretize(std::span<const double> values, const FeatureVector& original,
                         const FeatureFamilyTable& table) {
  if (values.size() != original.dim()) throw DimensionMismatch("discretize: value count differs from dimension");
  std::vector<FeatureIndex> enabled;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] >= 0.5) enabled.push_back(static_cast<FeatureIndex>(i));
  return validate_perturbations(original, FeatureVector(original.dim(), std::move(enabled)), table);
}

}  // namespace malprotect
