#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adcare/data/annotation.h"

namespace adcare::data {

/// A point in encoder feature space (mean unified token) with its label.
/// Synthetic points record the two originals they were interpolated between
/// and the mixing weight: features = x[parent_a] + u * (x[parent_b] - x[parent_a]).
struct FeaturePoint {
  std::string id;
  Label label = Label::positive;
  std::vector<double> features;
  bool synthetic = false;
  std::size_t parent_a = 0;  // indices into the balance() input
  std::size_t parent_b = 0;
  double u = 0.0;
};

struct BalanceConfig {
  std::array<double, 3> target{1.0 / 3, 1.0 / 3, 1.0 / 3};
  std::size_t k = 5;
  // Uniform seed selection instead of the density-weighted (adaptive) choice.
  bool vanilla = false;
};

/// Per-class counts for the output, summing to the input size.
std::array<std::size_t, 3> balance_targets(std::size_t n, const std::array<double, 3>& target);

/// Oversamples classes below target by interpolating between same-class
/// k-nearest neighbours and randomly undersamples classes above it. Seeds
/// are drawn in proportion to the share of other-class points among their k
/// nearest neighbours in the whole set (uniform if no point has any).
/// Kept originals come first in input order, then synthetic points.
/// Throws ConfigError when a class to oversample has fewer than k + 1 points.
std::vector<FeaturePoint> balance(std::span<const FeaturePoint> points, const BalanceConfig& config,
                                  std::uint64_t seed);

}  // namespace adcare::data
