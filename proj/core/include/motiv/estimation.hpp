#pragma once

#include "motiv/optim.hpp"
#include "motiv/types.hpp"
#include "motiv/workspace.hpp"

namespace motiv {

/// Result of the joint motif-variance / group-scale fit.
struct SigmaGFit {
  Vector tau;       // m
  Vector nu;        // g
  int fixed_index;  // pinned group, -1 when Sigma was held fixed
  OptimResult info;
};

struct MuMFit {
  Vector mu_m;  // m
  Matrix info;  // m x m information matrix of the solve
};

/// Log-density of the complement-projected data under the pure-noise model,
/// evaluated in O(g^2) from cached Gram blocks. Includes the Gaussian
/// normalization constant so dense oracles can compare values directly.
double reml_log_density(const FitWorkspace& ws, const Vector& sigma);

/// Gradient of -reml_log_density with respect to sigma (original scale).
Vector reml_negdensity_grad(const FitWorkspace& ws, const Vector& sigma);

/// REML estimate of the per-group noise variances. Uses the closed form for
/// a single group and a quasi-Newton fit in log space otherwise. Also fills
/// the workspace noise caches at the estimate.
Vector estimate_D(FitWorkspace& ws, const OptimizerConfig& cfg);

/// Minimum-norm estimate of the promoter means, computed with matrix-vector
/// products only.
Vector estimate_mu_p(const FitWorkspace& ws, const Vector& sigma);

/// Log-density of the doubly centered, column-whitened data under the
/// Kronecker covariance for given (sigma, tau, nu); includes the Gaussian
/// constant. Optional outputs receive the gradient of the NEGATIVE
/// log-density with respect to tau and nu in the original scale.
double sigma_g_log_density(const FitWorkspace& ws, const Vector& sigma, const Vector& tau,
                           const Vector& nu, Vector* grad_neg_tau = nullptr,
                           Vector* grad_neg_nu = nullptr);

/// Maximum-likelihood fit of (tau, nu) with the scale flat direction removed
/// by pinning nu of the smallest-sigma group to sigma/4. With
/// `estimate_tau == false`, Sigma is held at the identity and only nu is fit
/// (all groups free; the scale is then identified). Fills the workspace
/// eigenpair slots at the final iterate.
SigmaGFit estimate_sigma_G(FitWorkspace& ws, const Vector& sigma, const OptimizerConfig& cfg,
                           bool estimate_tau = true);

/// Exact solve for the motif activity means plus their information matrix.
MuMFit estimate_mu_m(const FitWorkspace& ws, const ModelParams& params);

/// Joint REML fit of the per-promoter variances (and nuisance per-group
/// noise scales) on the doubly projected residual model. Returns one
/// variance per raw promoter, normalized to unit geometric mean;
/// zero-variance promoters are excluded with a warning and reported as 1.
Vector estimate_promoter_variances(const ExpressionDataset& dataset,
                                   const MotifLoadings& loadings, const OptimizerConfig& cfg);

/// Log-density for the promoter-variance model at (k, sigma); exposed for
/// oracle tests. `k` has one entry per raw promoter of `dataset`.
double promoter_variance_log_density(const ExpressionDataset& dataset,
                                     const MotifLoadings& loadings, const Vector& k,
                                     const Vector& sigma);

}  // namespace motiv
