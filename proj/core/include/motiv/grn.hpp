#pragma once

#include "motiv/types.hpp"

#include <filesystem>

namespace motiv {

struct GrnRecord {
  int promoter;
  int motif;
  int group;
  double p_h0;  // posterior probability that the motif affects the promoter
};

/// Per-promoter, per-group motif effect scores by Bayesian model comparison:
/// the fitted linear model against the same model with one motif's effect
/// deleted, at a fixed residual variance estimated per (promoter, group).
/// Motifs with zero loading keep the prior and rows within 0.01 of the prior
/// are dropped, so the result is sparse. Groups with fewer than two samples
/// are skipped. Records are ordered by (promoter, motif, group).
std::vector<GrnRecord> grn_scores(const ExpressionDataset& dataset,
                                  const MotifLoadings& loadings, const ModelParams& params,
                                  const PosteriorActivities& posterior, double prior_h0,
                                  int threads = 1);

void write_grn(const std::vector<GrnRecord>& records, const ExpressionDataset& dataset,
               const MotifLoadings& loadings, const std::filesystem::path& path);

}  // namespace motiv
