#pragma once

#include <vector>

namespace geosim {

/// Minimum-cost perfect assignment on a square cost matrix (rows x rows),
/// O(n^3) shortest augmenting paths with potentials. cost[i][j] must be
/// finite; use a large sentinel for forbidden pairs. Returns, per row, the
/// assigned column.
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost);

}  // namespace geosim
