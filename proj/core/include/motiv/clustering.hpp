#pragma once

#include "motiv/types.hpp"

#include <cstdint>

namespace motiv {

struct ClusterResult {
  MotifLoadings reduced;            // raw promoters x c
  std::vector<int> assignment;      // motif -> cluster
  std::vector<int> cluster_sizes;   // c
};

/// K-means over cosine-normalized loading columns (motifs as points in
/// promoter space), k-means++ seeded, 10 restarts, best within-cluster sum
/// of squares kept. The reduced matrix holds per-cluster column sums; with
/// `unit_variance` (the Sigma = I regime) each column is further scaled by
/// 1/sqrt(cluster size). Restart reseeding handles empty clusters; persistent
/// emptiness is an error.
ClusterResult hard_cluster(const MotifLoadings& loadings, int c, uint64_t seed,
                           bool unit_variance = false);

}  // namespace motiv
