#pragma once

#include "tsnet/tensor.hpp"

#include <cstdint>
#include <vector>

namespace tsnet {

struct ClusterOptions {
  int max_iterations = 100;
  double tolerance = 1e-6;  // stop once no centroid moves farther than this
};

struct ClusterResult {
  std::vector<int> selected;     // candidate index representing each cluster
  std::vector<int> assignment;   // cluster of every candidate
  Matrix centroids;              // K x L
  std::vector<double> wcss;      // within-cluster sum of squares after each assignment step
  int iterations = 0;
};

/// k-means++ seeding from `seed`, Lloyd refinement, then each centroid is
/// replaced by the nearest member of its own cluster so every output row is a
/// real candidate. `candidates` is C x L. Throws ArgumentError unless C >= K >= 1.
ClusterResult cluster_predictions(const Matrix& candidates, int k, std::uint64_t seed,
                                  const ClusterOptions& options = {});

/// Rows of `candidates` picked by cluster_predictions, in cluster order.
Matrix cluster_select(const Matrix& candidates, int k, std::uint64_t seed, const ClusterOptions& options = {});

}  // namespace tsnet
