#include "motiv/clustering.hpp"

#include "motiv/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace motiv {

namespace {

struct KmeansRun {
  std::vector<int> assignment;
  double wcss = std::numeric_limits<double>::infinity();
  bool valid = false;
};

KmeansRun lloyd(const Matrix& points, int c, Rng& rng) {
  const int m = static_cast<int>(points.cols());
  const int dim = static_cast<int>(points.rows());

  // k-means++ seeding.
  Matrix centers(dim, c);
  Vector dist2 = Vector::Constant(m, std::numeric_limits<double>::infinity());
  {
    const int first = static_cast<int>(rng.next() % static_cast<uint64_t>(m));
    centers.col(0) = points.col(first);
    for (int k = 1; k < c; ++k) {
      double total = 0.0;
      for (int j = 0; j < m; ++j) {
        const double d = (points.col(j) - centers.col(k - 1)).squaredNorm();
        dist2[j] = std::min(dist2[j], d);
        total += dist2[j];
      }
      int pick = m - 1;
      if (total > 0.0) {
        const double target = rng.uniform() * total;
        double acc = 0.0;
        for (int j = 0; j < m; ++j) {
          acc += dist2[j];
          if (acc >= target) {
            pick = j;
            break;
          }
        }
      } else {
        pick = static_cast<int>(rng.next() % static_cast<uint64_t>(m));
      }
      centers.col(k) = points.col(pick);
    }
  }

  KmeansRun run;
  run.assignment.assign(static_cast<size_t>(m), 0);
  for (int iter = 0; iter < 200; ++iter) {
    bool changed = false;
    for (int j = 0; j < m; ++j) {
      int best = 0;
      double best_d = (points.col(j) - centers.col(0)).squaredNorm();
      for (int k = 1; k < c; ++k) {
        const double d = (points.col(j) - centers.col(k)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      if (run.assignment[static_cast<size_t>(j)] != best) {
        run.assignment[static_cast<size_t>(j)] = best;
        changed = true;
      }
    }
    std::vector<int> counts(static_cast<size_t>(c), 0);
    centers.setZero();
    for (int j = 0; j < m; ++j) {
      centers.col(run.assignment[static_cast<size_t>(j)]) += points.col(j);
      ++counts[static_cast<size_t>(run.assignment[static_cast<size_t>(j)])];
    }
    for (int k = 0; k < c; ++k) {
      if (counts[static_cast<size_t>(k)] == 0) return run;  // empty cluster: invalid
      centers.col(k) /= static_cast<double>(counts[static_cast<size_t>(k)]);
    }
    if (!changed && iter > 0) break;
  }

  run.wcss = 0.0;
  for (int j = 0; j < m; ++j) {
    run.wcss += (points.col(j) - centers.col(run.assignment[static_cast<size_t>(j)])).squaredNorm();
  }
  run.valid = true;
  return run;
}

}  // namespace

ClusterResult hard_cluster(const MotifLoadings& loadings, int c, uint64_t seed,
                           bool unit_variance) {
  const int m = loadings.n_motifs();
  if (c < 1 || c > m) throw std::invalid_argument("cluster count must be in [1, motifs]");

  Matrix points = loadings.values;
  for (int j = 0; j < m; ++j) {
    const double norm = points.col(j).norm();
    if (norm > 0.0) points.col(j) /= norm;
  }

  KmeansRun best;
  for (int restart = 0; restart < 10; ++restart) {
    Rng rng(Rng::derive(seed, 0x6b6d6e73u + static_cast<uint64_t>(restart)));
    KmeansRun run = lloyd(points, c, rng);
    if (run.valid && run.wcss < best.wcss) best = run;
  }
  if (!best.valid) {
    throw std::runtime_error("clustering failed: empty cluster after 10 restarts");
  }

  ClusterResult res;
  res.assignment = best.assignment;
  res.cluster_sizes.assign(static_cast<size_t>(c), 0);
  for (int j = 0; j < m; ++j) ++res.cluster_sizes[static_cast<size_t>(best.assignment[static_cast<size_t>(j)])];

  res.reduced.values = Matrix::Zero(loadings.values.rows(), c);
  for (int j = 0; j < m; ++j) {
    res.reduced.values.col(best.assignment[static_cast<size_t>(j)]) += loadings.values.col(j);
  }
  if (unit_variance) {
    for (int k = 0; k < c; ++k) {
      res.reduced.values.col(k) /= std::sqrt(static_cast<double>(res.cluster_sizes[static_cast<size_t>(k)]));
    }
  }
  res.reduced.motif_ids.resize(static_cast<size_t>(c));
  for (int k = 0; k < c; ++k) res.reduced.motif_ids[static_cast<size_t>(k)] = "cluster_" + std::to_string(k);
  return res;
}

}  // namespace motiv
