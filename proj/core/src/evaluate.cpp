#include "motiv/simgen.hpp"

#include "motiv/rng.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace motiv {

double pearson(const Matrix& a, const Matrix& b) {
  if (a.size() != b.size()) throw std::invalid_argument("pearson: size mismatch");
  const double ma = a.mean();
  const double mb = b.mean();
  const Eigen::ArrayXXd da = a.array() - ma;
  const Eigen::ArrayXXd db = b.array() - mb;
  const double denom = std::sqrt(da.square().sum() * db.square().sum());
  if (denom == 0.0) return 0.0;
  return (da * db).sum() / denom;
}

double mape(const Vector& estimate, const Vector& truth) {
  if (estimate.size() != truth.size()) throw std::invalid_argument("mape: size mismatch");
  double acc = 0.0;
  int used = 0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    if (truth[i] == 0.0) continue;
    acc += std::abs((estimate[i] - truth[i]) / truth[i]);
    ++used;
  }
  return used > 0 ? acc / used : 0.0;
}

Vector normalize_geometric(const Vector& v) {
  if ((v.array() <= 0.0).any()) throw std::invalid_argument("geometric normalization needs positive entries");
  return v / std::exp(v.array().log().mean());
}

Metrics evaluate(const ExpressionDataset& dataset, const MotifLoadings& loadings,
                 const ModelParams& fitted, const Matrix& activity,
                 const GroundTruth& truth, double holdout_frac, uint64_t seed) {
  Metrics metrics;
  const int p = dataset.n_promoters();
  const int n = dataset.n_samples();
  const int g = dataset.n_groups();

  // Group-mean truth: the estimand of a per-group activity model.
  Matrix u_group = Matrix::Zero(truth.u_true.rows(), g);
  for (int t = 0; t < n; ++t) u_group.col(dataset.group_of[static_cast<size_t>(t)]) += truth.u_true.col(t);
  for (int a = 0; a < g; ++a) u_group.col(a) /= static_cast<double>(dataset.group_sizes[static_cast<size_t>(a)]);
  metrics.activity_pcc = pearson(activity, u_group);

  metrics.mape_sigma = mape(fitted.sigma, truth.params.sigma);
  {
    // nu (and tau) are only identified up to a joint scale.
    const Vector est = normalize_geometric(fitted.nu);
    const Vector tru = normalize_geometric(truth.params.nu);
    metrics.mape_nu = mape(est, tru);
  }

  // Predictive score on a held-out promoter split: expand activities across
  // samples, double-center both sides to strip the nuisance means.
  {
    const int held = std::max(1, static_cast<int>(std::round(holdout_frac * p)));
    std::vector<int> order(static_cast<size_t>(p));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(Rng::derive(seed + 1, 0x686f6c64));  // "hold"
    for (int i = p - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.next() % static_cast<uint64_t>(i + 1));
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }

    Matrix pred(held, n), obs(held, n);
    for (int t = 0; t < held; ++t) {
      const int row = order[static_cast<size_t>(t)];
      for (int s = 0; s < n; ++s) {
        pred(t, s) = loadings.values.row(row).dot(activity.col(dataset.group_of[static_cast<size_t>(s)]));
        obs(t, s) = dataset.values(row, s);
      }
    }
    auto double_center = [](Matrix& x) {
      x.colwise() -= x.rowwise().mean().eval();
      x.rowwise() -= x.colwise().mean().eval();
    };
    double_center(pred);
    double_center(obs);
    metrics.predictive_pcc = pearson(pred, obs);
  }

  if (fitted.promoter_var.size() > 0 && truth.params.promoter_var.size() > 0) {
    metrics.pcc_promoter_var =
        pearson(fitted.promoter_var, truth.params.promoter_var);
  }
  return metrics;
}

}  // namespace motiv
