#pragma once

#include "motiv/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace motiv {

/// Knobs of the synthetic data generator. Defaults mirror the smallest
/// useful configuration; sweeps override fields explicitly.
struct GeneratorConfig {
  int p = 1000;                 // promoters
  int s = 20;                   // samples
  int m = 100;                  // motifs
  double variance_ratio = 0.1;  // expected share of variance from the motif term
  double zm_frac = 0.0;         // fraction of motifs with no effect
  bool sigma_het = false;       // heterogeneous motif variances
  double sigma_var = 1.0;       // log-variance of the motif variances
  bool s_het = false;           // heterogeneous promoter variances
  double s_var_max = 2.0;       // upper bound of the promoter variances
  bool s_het_sample = false;    // per-sample promoter variances (misspecified)
  double s_sample_var = 0.1;    // log-variance of the per-sample draw
  int groups = 0;               // 0 = default split (4 when s >= 8, else 2)
  uint64_t seed = 0;

  void validate() const;
  int effective_groups() const;
};

/// A generated dataset with its ground truth.
struct GeneratedData {
  ExpressionDataset dataset;
  MotifLoadings loadings;
  ModelParams truth;       // sigma, nu, tau, mu_p, mu_m (+ promoter_var when drawn)
  Matrix u_true;           // motifs x samples
  Vector mu_n_true;        // samples
  Matrix sample_var;       // promoters x samples actual noise variances
};

/// Draws a dataset. Same seed, same config: bit-identical output.
GeneratedData generate(const GeneratorConfig& cfg);

/// Writes the dataset in the standard TSV formats plus truth/ and a
/// manifest.txt echoing the full configuration.
void write_generated(const GeneratedData& data, const GeneratorConfig& cfg,
                     const std::filesystem::path& dir);

GeneratorConfig read_manifest(const std::filesystem::path& path);

/// Ground truth as written by write_generated.
struct GroundTruth {
  ModelParams params;
  Matrix u_true;
};
GroundTruth read_truth(const std::filesystem::path& dir);

/// Classic double-centered ridge regression baseline: per-sample activities
/// with the zero-mean convention. The ridge weight is chosen by the same
/// promoter-fold cross validation as the signal-to-noise tuning.
Matrix mara_baseline(const ExpressionDataset& dataset, const MotifLoadings& loadings,
                     double ridge);

/// Baseline with CV-chosen ridge; returns the activities and the weight.
std::pair<Matrix, double> mara_baseline_cv(const ExpressionDataset& dataset,
                                           const MotifLoadings& loadings, int folds,
                                           uint64_t seed);

/// Evaluation metrics for a fit against generator ground truth.
struct Metrics {
  double predictive_pcc = 0.0;        // held-out promoters, double-centered
  double activity_pcc = 0.0;          // group-level activities vs group-mean truth
  double mape_sigma = 0.0;
  double mape_nu = 0.0;               // after unit-geometric-mean normalization
  std::optional<double> pcc_promoter_var;
};

/// Computes the metrics record. `activity` is motifs x groups;
/// `holdout_frac` promoters are split off deterministically from
/// seed + 1 for the predictive score.
Metrics evaluate(const ExpressionDataset& dataset, const MotifLoadings& loadings,
                 const ModelParams& fitted, const Matrix& activity,
                 const GroundTruth& truth, double holdout_frac, uint64_t seed);

/// Pearson correlation between two equally sized matrices/vectors, flattened.
double pearson(const Matrix& a, const Matrix& b);

/// Mean absolute percentage error.
double mape(const Vector& estimate, const Vector& truth);

/// Rescales a positive vector to unit geometric mean.
Vector normalize_geometric(const Vector& v);

}  // namespace motiv
