#pragma once

#include <span>

#include "malprotect/families.hpp"
#include "malprotect/feature_vector.hpp"

namespace malprotect {

/// Restores every change from `original` to `perturbed` that the family table
/// forbids: additions in non-addable families and removals in non-removable
/// families revert to the original bit. Permitted changes are kept.
FeatureVector validate_perturbations(const FeatureVector& original, const FeatureVector& perturbed,
                                     const FeatureFamilyTable& table);

/// Thresholds a real-valued vector at 0.5 and validates the result against
/// `original`.
FeatureVector discretize(std::span<const double> values, const FeatureVector& original,
                         const FeatureFamilyTable& table);

}  // namespace malprotect
