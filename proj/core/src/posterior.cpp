#include "motiv/posterior.hpp"

#include "motiv/rng.hpp"
#include "motiv/stats.hpp"
#include "motiv/threads.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace motiv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Group means of the fully mean-subtracted data (promoter means and the
/// motif-mean contribution removed), p x g.
Matrix group_deviation_means(const FitWorkspace& ws, const ModelParams& params) {
  Matrix yc = ws.y_centered;
  yc.colwise() -= (ws.h_p.apply_left(params.mu_p)).col(0);
  yc.colwise() -= (ws.b_centered * params.mu_m).eval();
  Matrix means = Matrix::Zero(ws.p(), ws.groups.g());
  for (int i = 0; i < ws.n(); ++i) {
    means.col(ws.groups.group_of[static_cast<size_t>(i)]) += yc.col(i);
  }
  for (int a = 0; a < ws.groups.g(); ++a) {
    means.col(a) /= static_cast<double>(ws.groups.sizes[static_cast<size_t>(a)]);
  }
  return means;
}

/// MAP of the zero-mean deviation for one group over the active motif set.
/// prior: diag(prior_var); likelihood precision weight = n_hat / sigma.
struct GroupPosterior {
  Vector mean;  // m, zeros for inactive motifs
  Matrix cov;   // m x m, zero rows/cols for inactive motifs
};

GroupPosterior solve_group(const Matrix& btb, const Matrix& bty_mean, int group,
                           const Vector& prior_var, double weight) {
  const int m = static_cast<int>(prior_var.size());
  std::vector<int> active;
  for (int j = 0; j < m; ++j) {
    if (prior_var[j] > 0.0) active.push_back(j);
  }

  GroupPosterior out;
  out.mean = Vector::Zero(m);
  out.cov = Matrix::Zero(m, m);
  if (active.empty()) return out;

  const int ma = static_cast<int>(active.size());
  Matrix precision(ma, ma);
  Vector rhs(ma);
  for (int x = 0; x < ma; ++x) {
    rhs[x] = weight * bty_mean(active[static_cast<size_t>(x)], group);
    for (int y = 0; y < ma; ++y) {
      precision(x, y) = weight * btb(active[static_cast<size_t>(x)], active[static_cast<size_t>(y)]);
    }
    precision(x, x) += 1.0 / prior_var[active[static_cast<size_t>(x)]];
  }
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("posterior precision is not positive definite");
  }
  const Matrix cov = llt.solve(Matrix::Identity(ma, ma));
  const Vector mean = cov * rhs;
  for (int x = 0; x < ma; ++x) {
    out.mean[active[static_cast<size_t>(x)]] = mean[x];
    for (int y = 0; y < ma; ++y) {
      out.cov(active[static_cast<size_t>(x)], active[static_cast<size_t>(y)]) = cov(x, y);
    }
  }
  return out;
}

}  // namespace

PosteriorActivities map_activities(const FitWorkspace& ws, const ModelParams& params,
                                   int threads) {
  const int m = ws.m();
  const int g = ws.groups.g();
  if (params.tau.size() != m || params.mu_m.size() != m || params.sigma.size() != g ||
      params.nu.size() != g || params.mu_p.size() != ws.p() + 1) {
    throw std::invalid_argument("parameter sizes do not match the workspace");
  }

  const Matrix means = group_deviation_means(ws, params);
  const Matrix bty_mean = ws.b_centered.transpose() * means;  // m x g

  PosteriorActivities post;
  post.mean.resize(m, g);
  post.zscores.resize(m, g);
  post.covariance.assign(static_cast<size_t>(g), Matrix());
  post.anova_stat = Vector::Constant(m, kNaN);
  post.anova_pvalue = Vector::Constant(m, kNaN);
  post.offtest_pvalue = Vector::Constant(m, kNaN);
  post.degenerate.assign(static_cast<size_t>(m), false);
  for (int j = 0; j < m; ++j) {
    if (params.tau[j] == 0.0) post.degenerate[static_cast<size_t>(j)] = true;
  }

  parallel_for(g, threads, [&](int a) {
    const double sigma = params.sigma[a];
    const double nu = params.snr ? (*params.snr * sigma) : params.nu[a];
    const Vector prior_var = nu * params.tau;
    const double weight = ws.groups.sizes[static_cast<size_t>(a)] / sigma;

    GroupPosterior gp = solve_group(ws.btb, bty_mean, a, prior_var, weight);
    post.covariance[static_cast<size_t>(a)] = gp.cov;
    for (int j = 0; j < m; ++j) {
      post.mean(j, a) = gp.mean[j] + params.mu_m[j];
      const double marginal = prior_var[j] - gp.cov(j, j);
      post.zscores(j, a) = marginal > 0.0 ? gp.mean[j] / std::sqrt(marginal) : 0.0;
    }
  });
  return post;
}

std::vector<double> default_snr_grid() {
  std::vector<double> grid(17);
  for (int i = 0; i < 17; ++i) {
    grid[static_cast<size_t>(i)] = std::pow(10.0, -3.0 + 6.0 * i / 16.0);
  }
  return grid;
}

double tune_snr(const FitWorkspace& ws, const ModelParams& params,
                const std::vector<double>& grid, int folds, uint64_t seed) {
  if (grid.empty()) throw std::invalid_argument("tune_snr: empty grid");
  if (grid.size() == 1) return grid[0];
  const int p = ws.p();
  const int m = ws.m();
  const int g = ws.groups.g();
  folds = std::max(2, std::min(folds, p));

  const Matrix means = group_deviation_means(ws, params);

  // Deterministic promoter shuffle, then round-robin fold assignment.
  std::vector<int> order(static_cast<size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(Rng::derive(seed, 0x666f6c64));  // "fold"
  for (int i = p - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next() % static_cast<uint64_t>(i + 1));
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }
  std::vector<int> fold_of(static_cast<size_t>(p));
  for (int i = 0; i < p; ++i) fold_of[static_cast<size_t>(order[static_cast<size_t>(i)])] = i % folds;

  std::vector<double> score(grid.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train, held;
    for (int i = 0; i < p; ++i) {
      (fold_of[static_cast<size_t>(i)] == f ? held : train).push_back(i);
    }
    if (train.empty() || held.empty()) continue;

    Matrix b_train(static_cast<Eigen::Index>(train.size()), m);
    Matrix y_train(static_cast<Eigen::Index>(train.size()), g);
    for (size_t t = 0; t < train.size(); ++t) {
      b_train.row(static_cast<Eigen::Index>(t)) = ws.b_centered.row(train[t]);
      y_train.row(static_cast<Eigen::Index>(t)) = means.row(train[t]);
    }
    Matrix b_held(static_cast<Eigen::Index>(held.size()), m);
    Matrix y_held(static_cast<Eigen::Index>(held.size()), g);
    for (size_t t = 0; t < held.size(); ++t) {
      b_held.row(static_cast<Eigen::Index>(t)) = ws.b_centered.row(held[t]);
      y_held.row(static_cast<Eigen::Index>(t)) = means.row(held[t]);
    }
    const Matrix btb_train = b_train.transpose() * b_train;
    const Matrix bty_train = b_train.transpose() * y_train;

    for (size_t gi = 0; gi < grid.size(); ++gi) {
      const double mu = grid[gi];
      double total = 0.0;
      for (int a = 0; a < g; ++a) {
        const double sigma = params.sigma[a];
        const double n_hat = ws.groups.sizes[static_cast<size_t>(a)];
        const Vector prior_var = (mu * sigma) * params.tau;
        GroupPosterior gp = solve_group(btb_train, bty_train, a, prior_var, n_hat / sigma);
        const Vector resid = y_held.col(a) - b_held * gp.mean;
        total += -0.5 * (resid.squaredNorm() / sigma +
                         static_cast<double>(held.size()) * std::log(2.0 * M_PI * sigma));
      }
      score[gi] += total;
    }
  }

  size_t best = 0;
  for (size_t gi = 1; gi < grid.size(); ++gi) {
    if (score[gi] > score[best]) best = gi;  // strict: ties keep the smaller mu
  }
  return grid[best];
}

MotifTests run_tests(PosteriorActivities& posterior, const ModelParams& params,
                     const FimResult* fim, const Matrix& mu_m_info,
                     const std::vector<std::string>& motif_ids,
                     const std::vector<std::string>& group_labels, const TestOptions& opts) {
  const int m = posterior.n_motifs();
  const int g = posterior.n_groups();

  MotifTests t;
  t.motif_ids = motif_ids;
  t.group_labels = group_labels;
  t.tau_hat = params.tau;
  t.tau_z = Vector::Constant(m, kNaN);
  t.tau_p = Vector::Constant(m, kNaN);
  t.mu_m_hat = params.mu_m;
  t.mu_m_se = Vector::Constant(m, kNaN);
  t.mu_m_p = Vector::Constant(m, kNaN);
  t.anova_chi2 = Vector::Constant(m, kNaN);
  t.anova_p = Vector::Constant(m, kNaN);
  t.offtest_p = Vector::Constant(m, kNaN);
  t.activity = posterior.mean;
  t.zscore = posterior.zscores;

  if (fim) {
    for (int i = 0; i < m; ++i) {
      const double var = fim->tau_variance(i);
      if (var > 0.0) {
        t.tau_z[i] = params.tau[i] / std::sqrt(var);
        t.tau_p[i] = normal_cdf(-t.tau_z[i]);  // one-sided, H1: tau > 0
      }
    }
  }
  {
    Eigen::LDLT<Matrix> ldlt(mu_m_info);
    if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0.0) {
      const Matrix cov = ldlt.solve(Matrix::Identity(m, m));
      for (int i = 0; i < m; ++i) {
        t.mu_m_se[i] = std::sqrt(std::max(cov(i, i), 0.0));
        if (t.mu_m_se[i] > 0.0) {
          const double z = params.mu_m[i] / t.mu_m_se[i];
          t.mu_m_p[i] = 2.0 * normal_cdf(-std::abs(z));
        }
      }
    }
  }

  if (g < 2) {
    warn("single sample group: cross-group comparison and off-test skipped");
    posterior.anova_stat = t.anova_chi2;
    posterior.anova_pvalue = t.anova_p;
    posterior.offtest_pvalue = t.offtest_p;
    return t;
  }

  // BLUE of the per-group activities under the posterior covariances,
  // restricted to motifs with positive prior variance everywhere.
  std::vector<int> active;
  for (int j = 0; j < m; ++j) {
    bool ok = !posterior.degenerate[static_cast<size_t>(j)];
    for (int a = 0; a < g && ok; ++a) ok = posterior.covariance[static_cast<size_t>(a)](j, j) > 0.0;
    if (ok) active.push_back(j);
  }
  Vector blue = Vector::Constant(m, kNaN);
  if (!active.empty()) {
    const int ma = static_cast<int>(active.size());
    Matrix wsum = Matrix::Zero(ma, ma);
    Vector bsum = Vector::Zero(ma);
    Matrix sub(ma, ma);
    Vector subu(ma);
    for (int a = 0; a < g; ++a) {
      const Matrix& cov = posterior.covariance[static_cast<size_t>(a)];
      for (int x = 0; x < ma; ++x) {
        subu[x] = posterior.mean(active[static_cast<size_t>(x)], a);
        for (int y = 0; y < ma; ++y) {
          sub(x, y) = cov(active[static_cast<size_t>(x)], active[static_cast<size_t>(y)]);
        }
      }
      Eigen::LLT<Matrix> llt(sub);
      if (llt.info() != Eigen::Success) {
        throw std::runtime_error("posterior covariance is not positive definite");
      }
      const Matrix prec = llt.solve(Matrix::Identity(ma, ma));
      wsum += prec;
      bsum += prec * subu;
    }
    const Vector mu_u = wsum.llt().solve(bsum);
    for (int x = 0; x < ma; ++x) blue[active[static_cast<size_t>(x)]] = mu_u[x];
  }

  for (int j : active) {
    double stat = 0.0;
    for (int a = 0; a < g; ++a) {
      const double diff = posterior.mean(j, a) - blue[j];
      stat += diff * diff / posterior.covariance[static_cast<size_t>(a)](j, j);
    }
    t.anova_chi2[j] = stat;
    t.anova_p[j] = chi2_sf(stat, static_cast<double>(g - 1));
  }

  // Off-test: posterior Monte Carlo of the min-over-groups squared
  // studentized activity, compared against the observed minimum.
  parallel_for(m, opts.threads, [&](int j) {
    if (posterior.degenerate[static_cast<size_t>(j)]) return;
    Vector sd_marg(g), sd_post(g), dev(g);
    double observed = std::numeric_limits<double>::infinity();
    for (int a = 0; a < g; ++a) {
      const double z = posterior.zscores(j, a);
      observed = std::min(observed, z * z);
      dev[a] = posterior.mean(j, a) - params.mu_m[j];
      sd_post[a] = std::sqrt(std::max(posterior.covariance[static_cast<size_t>(a)](j, j), 0.0));
      const double prior_var =
          (params.snr ? *params.snr * params.sigma[a] : params.nu[a]) * params.tau[j];
      const double marg = prior_var - posterior.covariance[static_cast<size_t>(a)](j, j);
      sd_marg[a] = marg > 0.0 ? std::sqrt(marg) : 0.0;
    }
    if ((sd_marg.array() == 0.0).any()) return;

    Rng rng(Rng::derive(opts.seed, 0x6f666674u + static_cast<uint64_t>(j)));
    int exceed = 0;
    for (int it = 0; it < opts.mc_draws; ++it) {
      double draw_min = std::numeric_limits<double>::infinity();
      for (int a = 0; a < g; ++a) {
        const double v = dev[a] + sd_post[a] * rng.normal();
        const double z = v / sd_marg[a];
        draw_min = std::min(draw_min, z * z);
      }
      if (draw_min > observed) ++exceed;
    }
    t.offtest_p[j] = static_cast<double>(exceed) / opts.mc_draws;
  });

  posterior.anova_stat = t.anova_chi2;
  posterior.anova_pvalue = t.anova_p;
  posterior.offtest_pvalue = t.offtest_p;
  return t;
}

}  // namespace motiv
