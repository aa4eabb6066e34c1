#include "motiv/grn.hpp"

#include "motiv/io.hpp"
#include "motiv/threads.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace motiv {

std::vector<GrnRecord> grn_scores(const ExpressionDataset& dataset,
                                  const MotifLoadings& loadings, const ModelParams& params,
                                  const PosteriorActivities& posterior, double prior_h0,
                                  int threads) {
  if (prior_h0 < 0.0 || prior_h0 > 1.0) {
    throw std::invalid_argument("prior probability must be in [0, 1]");
  }
  const int praw = dataset.n_promoters();
  const int n = dataset.n_samples();
  const int m = loadings.n_motifs();
  const int g = dataset.n_groups();
  const auto members = dataset.samples_by_group();

  // Residuals of the fitted model. The sample-wise intercepts are global
  // column means of the raw residual, estimated once and held fixed across
  // all deletion hypotheses; only the per-(promoter, group) noise variance
  // is refit.
  Matrix resid(praw, n);
  for (int s = 0; s < n; ++s) {
    resid.col(s) = dataset.values.col(s) - params.mu_p -
                   loadings.values * posterior.mean.col(dataset.group_of[static_cast<size_t>(s)]);
  }
  const Eigen::RowVectorXd sample_means = resid.colwise().mean();
  resid.rowwise() -= sample_means;

  const bool degenerate_prior = prior_h0 <= 0.0 || prior_h0 >= 1.0;
  const double prior_logodds =
      degenerate_prior ? 0.0 : std::log(prior_h0 / (1.0 - prior_h0));

  std::vector<std::vector<GrnRecord>> per_promoter(static_cast<size_t>(praw));
  parallel_for(praw, threads, [&](int i) {
    auto& out = per_promoter[static_cast<size_t>(i)];
    for (int a = 0; a < g; ++a) {
      const auto& idx = members[static_cast<size_t>(a)];
      const int na = static_cast<int>(idx.size());
      if (na < 2) continue;  // residual variance undefined

      double rss0 = 0.0, rsum = 0.0;
      for (int s : idx) {
        rss0 += resid(i, s) * resid(i, s);
        rsum += resid(i, s);
      }
      const double delta2 = std::max(rss0 / na, 1e-12);

      for (int j = 0; j < m; ++j) {
        const double b = loadings.values(i, j);
        if (b == 0.0) continue;  // identical likelihoods, probability stays at the prior

        // Deleting the motif's effect adds its (group-constant) contribution
        // back into the residual.
        const double shift = b * posterior.mean(j, a);
        const double rss1 = rss0 + 2.0 * shift * rsum + na * shift * shift;
        const double log_ratio = (rss1 - rss0) / (2.0 * delta2);  // ln L0 - ln L1

        double p;
        if (prior_h0 <= 0.0) {
          p = 0.0;
        } else if (prior_h0 >= 1.0) {
          p = 1.0;
        } else {
          const double odds = prior_logodds + log_ratio;
          p = 1.0 / (1.0 + std::exp(-odds));
        }
        if (std::abs(p - prior_h0) < 0.01) continue;  // sparsify on disk
        out.push_back({i, j, a, p});
      }
    }
  });

  std::vector<GrnRecord> records;
  for (auto& chunk : per_promoter) {
    for (const auto& r : chunk) records.push_back(r);
  }
  // Chunks are per promoter in order; sort each promoter's block by
  // (motif, group) for a stable on-disk layout.
  for (size_t lo = 0; lo < records.size();) {
    size_t hi = lo;
    while (hi < records.size() && records[hi].promoter == records[lo].promoter) ++hi;
    std::sort(records.begin() + static_cast<std::ptrdiff_t>(lo),
              records.begin() + static_cast<std::ptrdiff_t>(hi), [](const GrnRecord& x, const GrnRecord& y) {
                return x.motif != y.motif ? x.motif < y.motif : x.group < y.group;
              });
    lo = hi;
  }
  return records;
}

void write_grn(const std::vector<GrnRecord>& records, const ExpressionDataset& dataset,
               const MotifLoadings& loadings, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  out << "promoter_id\tmotif_id\tgroup\tp_h0\n";
  for (const auto& r : records) {
    out << dataset.promoter_ids[static_cast<size_t>(r.promoter)] << '\t'
        << loadings.motif_ids[static_cast<size_t>(r.motif)] << '\t'
        << dataset.group_labels[static_cast<size_t>(r.group)] << '\t'
        << format_double(r.p_h0) << '\n';
  }
}

}  // namespace motiv
