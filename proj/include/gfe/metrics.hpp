#pragma once

#include <span>

namespace gfe {

/// Adjusted Rand index of two labelings of the same units. Labels are
/// arbitrary non-negative integers. 1 for identical partitions up to relabeling.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

}  // namespace gfe
