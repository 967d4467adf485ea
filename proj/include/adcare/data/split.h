#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "adcare/data/annotation.h"

namespace adcare::data {

struct DatasetSplit {
  std::vector<AnnotationRecord> train;
  std::vector<AnnotationRecord> validation;
  double ratio = 0.7;
};

/// Patient-disjoint split. Records are put in canonical order (by video id),
/// patients are shuffled with the seed, and whole patients go to train while
/// they fit under round(ratio * n). The shortfall is always smaller than the
/// record count of some validation patient. Both halves keep canonical order.
/// Throws ConfigError for ratio outside (0, 1) or fewer than two patients.
DatasetSplit split(std::span<const AnnotationRecord> records, double ratio, std::uint64_t seed);

}  // namespace adcare::data
