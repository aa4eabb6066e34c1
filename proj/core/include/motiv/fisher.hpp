#pragma once

#include "motiv/types.hpp"
#include "motiv/workspace.hpp"

namespace motiv {

/// Assembled information matrix for the variance parameters, with the pinned
/// group scale removed (tau block first, then the free nu entries).
struct FimResult {
  Matrix matrix;           // (m + g - 1) x (m + g - 1)
  Matrix inverse;          // same shape, via Cholesky
  int fixed_index = -1;
  int n_motifs = 0;
  int n_groups = 0;

  /// Asymptotic variance of tau_i.
  double tau_variance(int i) const { return inverse(i, i); }
};

/// Exact information blocks for (tau, nu) evaluated at the workspace's
/// cached eigenpairs. No n*m-sized matrix is ever materialized.
Matrix fim_tau_block(const FitWorkspace& ws, const ModelParams& params);
Matrix fim_nu_block(const FitWorkspace& ws, const ModelParams& params);
Matrix fim_mixed_block(const FitWorkspace& ws, const ModelParams& params);

/// Stacks the blocks, drops the pinned nu row/column and factorizes.
/// Throws when the pinned matrix is not positive definite (non-identifiable
/// fit).
FimResult assemble_fim(const Matrix& tau_block, const Matrix& nu_block,
                       const Matrix& mixed_block, int fixed_index);

}  // namespace motiv
