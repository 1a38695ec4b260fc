#pragma once

#include "wishmix/numcore.hpp"
#include "wishmix/rng.hpp"

#include <vector>

namespace wishmix {

/// k-means (k-means++ seeding, Lloyd iterations, best of n_init runs) on the
/// rows of `points`. Returns 0-based labels; every cluster is non-empty when
/// rows >= k.
std::vector<int> kmeans_labels(const RowMatrix& points, int k, RngState& rng, int n_init = 5,
                               int max_iter = 100);

/// Minimum-cost perfect assignment (Hungarian algorithm) for a square cost
/// matrix. Returns perm with perm[row] = assigned column.
std::vector<int> min_cost_assignment(const Matrix& cost);

}  // namespace wishmix
