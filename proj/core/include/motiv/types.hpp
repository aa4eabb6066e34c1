#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace motiv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Promoter-by-sample expression matrix with its sample grouping.
///
/// `values` is expected on log scale; callers transform upstream, ingestion
/// never does. Group indices are dense and 0-based, ordered by first
/// appearance of the group label in the groups file, so that per-group
/// parameter vectors stay interpretable.
struct ExpressionDataset {
  Matrix values;                            // raw promoters x samples
  std::vector<std::string> promoter_ids;    // unique, row order
  std::vector<std::string> sample_ids;      // unique, column order
  std::vector<std::string> group_labels;    // group index -> label
  std::vector<int> group_of;                // sample index -> group index
  std::vector<int> group_sizes;             // per group

  int n_promoters() const { return static_cast<int>(values.rows()); }
  int n_samples() const { return static_cast<int>(values.cols()); }
  int n_groups() const { return static_cast<int>(group_sizes.size()); }

  std::vector<std::vector<int>> samples_by_group() const;

  /// Throws std::runtime_error on any violated invariant (shape mismatch,
  /// duplicate ids, non-finite values, empty groups).
  void validate() const;
};

/// Promoter-by-motif non-negative loading matrix, row-aligned to a dataset.
struct MotifLoadings {
  Matrix values;                         // raw promoters x motifs
  std::vector<std::string> motif_ids;
  int rank = -1;                         // numerical rank after centering; -1 until computed

  int n_promoters() const { return static_cast<int>(values.rows()); }
  int n_motifs() const { return static_cast<int>(values.cols()); }

  void validate() const;
};

/// All estimated model parameters.
///
/// sigma/nu are per group (noise variance and activity-scale multiplier),
/// tau per motif. promoter_var is empty unless the per-promoter variance
/// stage ran. fixed_index records which group's nu was pinned for
/// identifiability during the joint (tau, nu) fit; -1 when nothing is pinned.
struct ModelParams {
  Vector sigma;
  Vector nu;
  Vector tau;
  Vector promoter_var;                   // raw promoters; empty = not estimated
  Vector mu_p;                           // raw promoters
  Vector mu_m;                           // motifs
  std::optional<double> snr;             // cross-validated signal-to-noise ratio
  int fixed_index = -1;

  int n_groups() const { return static_cast<int>(sigma.size()); }
  int n_motifs() const { return static_cast<int>(tau.size()); }
};

/// Per-group MAP activities with posterior covariances and test statistics.
struct PosteriorActivities {
  Matrix mean;                           // motifs x groups, absolute scale (mu_m added back)
  std::vector<Matrix> covariance;        // per group, motifs x motifs
  Matrix zscores;                        // motifs x groups
  Vector anova_stat;                     // chi^2(g-1) per motif; NaN when g == 1
  Vector anova_pvalue;
  Vector offtest_pvalue;
  std::vector<bool> degenerate;          // motifs with zero prior variance (activity pinned at 0)

  int n_motifs() const { return static_cast<int>(mean.rows()); }
  int n_groups() const { return static_cast<int>(mean.cols()); }
};

/// Per-motif hypothesis-test table, one row per motif in tests.tsv.
///
/// Wald columns (tau, mu_m) come from the information matrices; the
/// remaining columns summarize the activity posterior. Skipped tests
/// (single group) hold NaN.
struct MotifTests {
  std::vector<std::string> motif_ids;
  std::vector<std::string> group_labels;
  Vector tau_hat, tau_z, tau_p;
  Vector mu_m_hat, mu_m_se, mu_m_p;
  Vector anova_chi2, anova_p, offtest_p;
  Matrix activity;  // motifs x groups
  Matrix zscore;    // motifs x groups
};

/// Emits a warning line on stderr. Kept as a free function so library code
/// stays usable without a logging framework.
void warn(const std::string& message);

}  // namespace motiv
