#pragma once

#include <span>

namespace wmixnet {

/// Adjusted Rand index between two labelings of the same nodes.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

}  // namespace wmixnet
