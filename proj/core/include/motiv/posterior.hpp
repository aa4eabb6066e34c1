#pragma once

#include "motiv/fisher.hpp"
#include "motiv/types.hpp"
#include "motiv/workspace.hpp"

#include <optional>

namespace motiv {

/// Per-group MAP activities and posterior covariances.
///
/// Group sample averages are taken after subtracting both the promoter means
/// and the motif-mean contribution, so the posterior prior is genuinely
/// zero-mean; mu_m is added back into the reported activities. When
/// params.snr is set, each group's nu is replaced by snr * sigma.
///
/// zscores studentize the deviation part by its marginal standard deviation
/// sqrt(prior variance - posterior variance), which is exactly standard
/// normal under the model and stays calibrated as the prior variance
/// approaches zero. Motifs with tau == 0 get activity mu_m, variance 0,
/// and are flagged.
PosteriorActivities map_activities(const FitWorkspace& ws, const ModelParams& params,
                                   int threads = 1);

/// Grid search for the signal-to-noise ratio by promoter-fold cross
/// validation: activities are refit on the training rows of B and scored as
/// a Gaussian predictive density on the held-out rows. Ties break toward the
/// smaller (more regularized) value.
double tune_snr(const FitWorkspace& ws, const ModelParams& params,
                const std::vector<double>& grid, int folds, uint64_t seed);

/// Default 17-point log-spaced grid in [1e-3, 1e3].
std::vector<double> default_snr_grid();

struct TestOptions {
  uint64_t seed = 0;
  int mc_draws = 10000;
  int threads = 1;
};

/// Fills the per-motif test table: Wald tests for tau (one-sided) and mu_m
/// (two-sided), per-group posterior z-scores, the chi^2(g-1) comparison of
/// group activities against their BLUE, and the Monte-Carlo "off" test.
/// `fim` may be null when Sigma was held fixed (tau columns become NaN).
/// With a single group the ANOVA and off-test columns are NaN.
MotifTests run_tests(PosteriorActivities& posterior, const ModelParams& params,
                     const FimResult* fim, const Matrix& mu_m_info,
                     const std::vector<std::string>& motif_ids,
                     const std::vector<std::string>& group_labels, const TestOptions& opts);

}  // namespace motiv
