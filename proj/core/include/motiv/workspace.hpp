#pragma once

#include "motiv/ortho.hpp"
#include "motiv/types.hpp"

namespace motiv {

/// Sample-to-group bookkeeping shared by every estimation stage.
struct GroupIndex {
  std::vector<int> group_of;              // n
  std::vector<int> sizes;                 // g
  std::vector<std::vector<int>> members;  // g lists of sample indices

  int n() const { return static_cast<int>(group_of.size()); }
  int g() const { return static_cast<int>(sizes.size()); }

  static GroupIndex from_dataset(const ExpressionDataset& dataset);

  /// Expands a per-group vector to a per-sample vector.
  Vector expand(const Vector& per_group) const;
  /// Sums a per-sample vector into per-group totals.
  Vector reduce(const Vector& per_sample) const;
};

/// Cached transforms and decompositions for one fit. Built once from the
/// dataset and loadings; the D-dependent and (Sigma, G)-dependent slots are
/// filled as the corresponding stages run.
struct FitWorkspace {
  GroupIndex groups;
  HelmertOperator h_p;  // promoter-side, dimension raw promoters
  HelmertOperator h_n;  // sample-side, dimension n

  Matrix y_centered;  // p x n        H_p applied to raw expression
  Matrix y_double;    // p x (n-1)    further right-transformed by H_n^T
  Matrix y_reml;      // (p-r) x (n-1) complement-projected
  Matrix b_centered;  // p x m
  Matrix btb;         // m x m  (centered loadings Gram)

  OrthoComplement complement;
  Matrix qc;     // p x r
  Vector svd_s;  // r
  Matrix svd_v;  // m x r
  int rank = 0;

  // Gram of the complement-projected data, reduced to group blocks. Lets the
  // noise-variance objective run in O(g^2) per iteration.
  Matrix reml_gram;        // n x n   (Q_N^T Y)^T (Q_N^T Y)

  // Filled by fill_noise_caches once sigma is known.
  Vector sigma_cached;     // g
  Matrix z_cache;          // m x n   B^T Y H_n^T (H_n D H_n^T)^{-1} H_n
  double ydouble_whitened_sqnorm = 0.0;  // ||Y~ L^{-T}||_F^2

  // Final eigenpairs from the (Sigma, G) stage, reused by the information
  // matrix and the motif-mean solve.
  Matrix q_a;   // n x n
  Vector alpha; // n
  Matrix q_b;   // m x m
  Vector beta;  // m

  int p() const { return static_cast<int>(y_centered.rows()); }
  int n() const { return static_cast<int>(y_centered.cols()); }
  int m() const { return static_cast<int>(b_centered.cols()); }

  /// Per-sample noise variance vector for the given per-group sigma.
  Vector expand_sigma(const Vector& sigma) const { return groups.expand(sigma); }
};

FitWorkspace build_workspace(const ExpressionDataset& dataset, const MotifLoadings& loadings);

/// Computes the D-dependent caches (z_cache, whitened norm) for a fixed
/// per-group sigma.
void fill_noise_caches(FitWorkspace& ws, const Vector& sigma);

/// Eigendecomposition of sqrt(G) H_n^T (H_n D H_n^T)^{-1} H_n sqrt(G)
/// exploiting its diagonal-minus-rank-one structure: within-group contrast
/// directions are eigenvectors already, and the remaining g-dimensional
/// subspace reduces to a dense g x g problem. O(n g^2) overall.
void eigen_group_sandwich(const GroupIndex& groups, const Vector& sigma, const Vector& nu,
                          Matrix& q_a, Vector& alpha);

}  // namespace motiv
