#include "tsnet/cluster.hpp"

#include "tsnet/error.hpp"

#include <limits>

namespace tsnet {

namespace {

double sq_dist(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

Matrix seed_centroids(const Matrix& x, int k, Rng& rng) {
  const Eigen::Index c = x.rows();
  Matrix centroids(k, x.cols());
  std::vector<char> taken(static_cast<std::size_t>(c), 0);
  std::uniform_int_distribution<Eigen::Index> first(0, c - 1);
  Eigen::Index pick = first(rng);
  centroids.row(0) = x.row(pick);
  taken[static_cast<std::size_t>(pick)] = 1;

  Eigen::VectorXd d2(c);
  for (Eigen::Index i = 0; i < c; ++i) d2(i) = sq_dist(x, i, centroids, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int m = 1; m < k; ++m) {
    const double total = d2.sum();
    if (total > 0.0) {
      double r = unit(rng) * total;
      pick = -1;
      for (Eigen::Index i = 0; i < c; ++i) {
        if (d2(i) <= 0.0) continue;
        pick = i;
        r -= d2(i);
        if (r < 0.0) break;
      }
    } else {
      // Every point coincides with a centroid: take the first unused one.
      pick = 0;
      while (taken[static_cast<std::size_t>(pick)]) ++pick;
    }
    taken[static_cast<std::size_t>(pick)] = 1;
    centroids.row(m) = x.row(pick);
    for (Eigen::Index i = 0; i < c; ++i) d2(i) = std::min(d2(i), sq_dist(x, i, centroids, m));
  }
  return centroids;
}

}  // namespace

ClusterResult cluster_predictions(const Matrix& candidates, int k, std::uint64_t seed, const ClusterOptions& options) {
  const Eigen::Index c = candidates.rows();
  if (k < 1) throw ArgumentError("cluster_predictions: K must be >= 1");
  if (c < k) {
    throw ArgumentError("cluster_predictions: C = " + std::to_string(c) + " is smaller than K = " + std::to_string(k));
  }
  if (!candidates.allFinite()) throw NumericError("cluster_predictions: non-finite candidates");

  Rng rng(seed);
  ClusterResult out;
  out.centroids = seed_centroids(candidates, k, rng);
  out.assignment.assign(static_cast<std::size_t>(c), 0);

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    double wcss = 0;
    for (Eigen::Index i = 0; i < c; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int m = 0; m < k; ++m) {
        const double d = sq_dist(candidates, i, out.centroids, m);
        if (d < best_d) {
          best_d = d;
          best = m;
        }
      }
      out.assignment[static_cast<std::size_t>(i)] = best;
      wcss += best_d;
    }
    out.wcss.push_back(wcss);
    out.iterations = iter + 1;

    Matrix next = Matrix::Zero(k, candidates.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < c; ++i) {
      const int m = out.assignment[static_cast<std::size_t>(i)];
      next.row(m) += candidates.row(i);
      ++counts[static_cast<std::size_t>(m)];
    }
    double moved = 0;
    for (int m = 0; m < k; ++m) {
      if (counts[static_cast<std::size_t>(m)] == 0) {
        next.row(m) = out.centroids.row(m);  // empty cluster keeps its centroid
      } else {
        next.row(m) /= counts[static_cast<std::size_t>(m)];
      }
      moved = std::max(moved, (next.row(m) - out.centroids.row(m)).norm());
    }
    out.centroids = std::move(next);
    if (moved < options.tolerance) break;
  }

  // Final assignment against the refined centroids, then snap each centroid
  // to its nearest member.
  double wcss = 0;
  for (Eigen::Index i = 0; i < c; ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int m = 0; m < k; ++m) {
      const double d = sq_dist(candidates, i, out.centroids, m);
      if (d < best_d) {
        best_d = d;
        best = m;
      }
    }
    out.assignment[static_cast<std::size_t>(i)] = best;
    wcss += best_d;
  }
  out.wcss.push_back(wcss);

  std::vector<char> used(static_cast<std::size_t>(c), 0);
  out.selected.assign(static_cast<std::size_t>(k), -1);
  std::vector<double> best_d(static_cast<std::size_t>(k), std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < c; ++i) {
    const int m = out.assignment[static_cast<std::size_t>(i)];
    const double d = sq_dist(candidates, i, out.centroids, m);
    if (d < best_d[static_cast<std::size_t>(m)]) {
      best_d[static_cast<std::size_t>(m)] = d;
      out.selected[static_cast<std::size_t>(m)] = static_cast<int>(i);
    }
  }
  for (int s : out.selected) {
    if (s >= 0) used[static_cast<std::size_t>(s)] = 1;
  }
  // Empty clusters take the nearest candidate not chosen yet.
  for (int m = 0; m < k; ++m) {
    if (out.selected[static_cast<std::size_t>(m)] >= 0) continue;
    double bd = std::numeric_limits<double>::infinity();
    int bi = -1;
    for (Eigen::Index i = 0; i < c; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      const double d = sq_dist(candidates, i, out.centroids, m);
      if (d < bd) {
        bd = d;
        bi = static_cast<int>(i);
      }
    }
    out.selected[static_cast<std::size_t>(m)] = bi;
    used[static_cast<std::size_t>(bi)] = 1;
  }
  return out;
}

Matrix cluster_select(const Matrix& candidates, int k, std::uint64_t seed, const ClusterOptions& options) {
  const auto r = cluster_predictions(candidates, k, seed, options);
  Matrix out(k, candidates.cols());
  for (int m = 0; m < k; ++m) out.row(m) = candidates.row(r.selected[static_cast<std::size_t>(m)]);
  return out;
}

}  // namespace tsnet
