#include "motiv/posterior.hpp"

#include "motiv/estimation.hpp"
#include "motiv/simgen.hpp"
#include "motiv/stats.hpp"

#include "oracles.hpp"

#include <doctest.h>

using motiv::Matrix;
using motiv::Vector;

namespace {

motiv::ModelParams zero_mean_params(const motiv::FitWorkspace& ws, const Vector& sigma,
                                    const Vector& nu, const Vector& tau) {
  motiv::ModelParams params;
  params.sigma = sigma;
  params.nu = nu;
  params.tau = tau;
  params.mu_p = Vector::Zero(ws.p() + 1);
  params.mu_m = Vector::Zero(ws.m());
  return params;
}

Matrix group_means(const motiv::FitWorkspace& ws) {
  Matrix means = Matrix::Zero(ws.p(), ws.groups.g());
  for (int i = 0; i < ws.n(); ++i) {
    means.col(ws.groups.group_of[static_cast<size_t>(i)]) += ws.y_centered.col(i);
  }
  for (int a = 0; a < ws.groups.g(); ++a) {
    means.col(a) /= static_cast<double>(ws.groups.sizes[static_cast<size_t>(a)]);
  }
  return means;
}

}  // namespace

TEST_CASE("closed form with orthonormal loadings") {
  // Centered loadings with orthonormal columns, unit prior and noise,
  // single-sample group: posterior covariance is I/2 and the mean is half
  // the projected data.
  const int p_raw = 8, m = 2;
  motiv::ExpressionDataset ds;
  motiv::Rng rng(4);
  ds.values.resize(p_raw, 2);
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < p_raw; ++i) ds.values(i, j) = rng.normal();
  }
  for (int i = 0; i < p_raw; ++i) ds.promoter_ids.push_back("p" + std::to_string(i));
  ds.sample_ids = {"s0", "s1"};
  ds.group_of = {0, 1};
  ds.group_sizes = {1, 1};
  ds.group_labels = {"a", "b"};

  motiv::MotifLoadings lo;
  const Matrix hp = motiv::HelmertOperator::dense(p_raw);
  Matrix target = Matrix::Zero(p_raw - 1, m);
  target(0, 0) = 1.0;
  target(3, 1) = 1.0;
  lo.values = hp.transpose() * target;
  lo.values.array() -= lo.values.minCoeff();
  lo.motif_ids = {"m0", "m1"};

  auto ws = motiv::build_workspace(ds, lo);
  auto params = zero_mean_params(ws, Vector::Ones(2), Vector::Ones(2), Vector::Ones(2));
  auto post = motiv::map_activities(ws, params);

  const Matrix means = group_means(ws);
  for (int a = 0; a < 2; ++a) {
    CHECK((post.covariance[static_cast<size_t>(a)] - 0.5 * Matrix::Identity(m, m))
              .cwiseAbs()
              .maxCoeff() < 1e-10);
    const Vector expected = 0.5 * ws.b_centered.transpose() * means.col(a);
    CHECK((post.mean.col(a) - expected).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("posterior matches the dense conjugate-Gaussian conditioning") {
  for (uint64_t seed : {6u, 16u}) {
    auto tiny = oracle::make_tiny(7, 6, 3, 2, seed);
    auto ws = motiv::build_workspace(tiny.dataset, tiny.loadings);
    const Vector sigma = oracle::random_positive(2, seed + 1, 0.5, 2.0);
    const Vector nu = oracle::random_positive(2, seed + 2, 0.3, 2.0);
    const Vector tau = oracle::random_positive(3, seed + 3, 0.3, 2.0);
    auto params = zero_mean_params(ws, sigma, nu, tau);
    auto post = motiv::map_activities(ws, params);

    const Matrix means = group_means(ws);
    for (int a = 0; a < 2; ++a) {
      const double n_hat = ws.groups.sizes[static_cast<size_t>(a)];
      const Matrix prior = Matrix((nu[a] * tau).asDiagonal());
      const Matrix cross = prior * ws.b_centered.transpose();
      Matrix marg = ws.b_centered * cross;
      marg.diagonal().array() += sigma[a] / n_hat;
      const Matrix gain = cross * marg.inverse();
      const Vector mean = gain * means.col(a);
      const Matrix cov = prior - gain * cross.transpose();
      CHECK((post.mean.col(a) - mean).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((post.covariance[static_cast<size_t>(a)] - cov).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("infinite signal-to-noise degenerates into least squares") {
  auto tiny = oracle::make_tiny(9, 4, 2, 2, 33);
  auto ws = motiv::build_workspace(tiny.dataset, tiny.loadings);
  auto params = zero_mean_params(ws, Vector::Ones(2), Vector::Ones(2), Vector::Ones(2));
  params.snr = 1e12;
  auto post = motiv::map_activities(ws, params);

  const Matrix means = group_means(ws);
  for (int a = 0; a < 2; ++a) {
    const Vector ls = ws.btb.ldlt().solve(ws.b_centered.transpose() * means.col(a));
    CHECK((post.mean.col(a) - ls).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("posterior mean is linear in the data") {
  auto tiny = oracle::make_tiny(8, 6, 3, 2, 44);
  auto ws = motiv::build_workspace(tiny.dataset, tiny.loadings);
  auto params = zero_mean_params(ws, Vector::Ones(2), Vector::Ones(2), Vector::Ones(3));
  auto post1 = motiv::map_activities(ws, params);

  auto doubled = tiny;
  doubled.dataset.values *= 2.0;
  auto ws2 = motiv::build_workspace(doubled.dataset, doubled.loadings);
  auto post2 = motiv::map_activities(ws2, params);
  CHECK((post2.mean - 2.0 * post1.mean).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("degenerate motifs are pinned at zero") {
  auto tiny = oracle::make_tiny(8, 6, 3, 2, 55);
  auto ws = motiv::build_workspace(tiny.dataset, tiny.loadings);
  Vector tau = oracle::random_positive(3, 1, 0.5, 1.5);
  tau[1] = 0.0;
  auto params = zero_mean_params(ws, Vector::Ones(2), Vector::Ones(2), tau);
  auto post = motiv::map_activities(ws, params);
  CHECK(post.degenerate[1]);
  for (int a = 0; a < 2; ++a) {
    CHECK(post.mean(1, a) == 0.0);
    CHECK(post.covariance[static_cast<size_t>(a)](1, 1) == 0.0);
    CHECK(post.zscores(1, a) == 0.0);
  }
}

TEST_CASE("signal-to-noise tuning") {
  SUBCASE("single point grid returned unchanged") {
    auto tiny = oracle::make_tiny(10, 4, 2, 2, 66);
    auto ws = motiv::build_workspace(tiny.dataset, tiny.loadings);
    auto params = zero_mean_params(ws, Vector::Ones(2), Vector::Ones(2), Vector::Ones(2));
    CHECK(motiv::tune_snr(ws, params, {0.37}, 5, 1) == 0.37);
  }

  SUBCASE("selects near the true ratio on generated data") {
    motiv::GeneratorConfig cfg;
    cfg.p = 500;
    cfg.s = 12;
    cfg.m = 10;
    cfg.groups = 2;
    cfg.variance_ratio = 0.2;
    int close = 0;
    const int seeds = 10;
    for (uint64_t seed = 0; seed < seeds; ++seed) {
      cfg.seed = seed + 100;
      auto data = motiv::generate(cfg);
      auto ws = motiv::build_workspace(data.dataset, data.loadings);
      motiv::OptimizerConfig ocfg;
      motiv::ModelParams params;
      params.sigma = motiv::estimate_D(ws, ocfg);
      params.nu = data.truth.nu;
      params.tau = data.truth.tau;
      params.mu_p = motiv::estimate_mu_p(ws, params.sigma);
      params.mu_m = data.truth.mu_m;

      // Grid around the per-group truth nu/sigma (geometric mean).
      const double truth =
          std::exp(((data.truth.nu.array() / data.truth.sigma.array()).log()).mean());
      std::vector<double> grid;
      for (int k = -4; k <= 4; ++k) grid.push_back(truth * std::pow(2.0, k));
      const double chosen = motiv::tune_snr(ws, params, grid, 5, seed);
      const double ratio = chosen / truth;
      if (ratio >= 0.49 && ratio <= 2.01) ++close;
    }
    CHECK(close >= 7);
  }
}

TEST_CASE("test table") {
  SUBCASE("identical groups give a null comparison") {
    // Fabricate a two group posterior with equal activities and covariances.
    motiv::PosteriorActivities post;
    const int m = 3;
    post.mean = Matrix::Ones(m, 2);
    post.zscores = Matrix::Zero(m, 2);
    post.covariance = {Matrix::Identity(m, m), Matrix::Identity(m, m)};
    post.anova_stat = post.anova_pvalue = post.offtest_pvalue = Vector::Zero(m);
    post.degenerate.assign(m, false);

    motiv::ModelParams params;
    params.sigma = Vector::Ones(2);
    params.nu = Vector::Ones(2);
    params.tau = Vector::Ones(m);
    params.mu_m = Vector::Zero(m);
    params.mu_p = Vector::Zero(4);

    motiv::TestOptions opts;
    auto table = motiv::run_tests(post, params, nullptr, Matrix::Identity(m, m),
                                  {"m0", "m1", "m2"}, {"a", "b"}, opts);
    for (int j = 0; j < m; ++j) {
      CHECK(table.anova_chi2[j] == doctest::Approx(0.0));
      CHECK(table.anova_p[j] == doctest::Approx(1.0));
    }
  }

  SUBCASE("precision weighted mean for diagonal covariances") {
    motiv::PosteriorActivities post;
    const int m = 2;
    post.mean.resize(m, 2);
    post.mean << 1.0, 4.0, -2.0, 1.0;
    post.zscores = Matrix::Zero(m, 2);
    post.covariance = {Matrix::Identity(m, m), 2.0 * Matrix::Identity(m, m)};
    post.degenerate.assign(m, false);

    motiv::ModelParams params;
    params.sigma = Vector::Ones(2);
    params.nu = Vector::Ones(2);
    params.tau = Vector::Ones(m);
    params.mu_m = Vector::Zero(m);
    params.mu_p = Vector::Zero(4);

    motiv::TestOptions opts;
    auto table = motiv::run_tests(post, params, nullptr, Matrix::Identity(m, m),
                                  {"m0", "m1"}, {"a", "b"}, opts);
    // BLUE = (2 U1 + U2) / 3 per motif.
    for (int j = 0; j < m; ++j) {
      const double blue = (2.0 * post.mean(j, 0) + post.mean(j, 1)) / 3.0;
      const double expected = (post.mean(j, 0) - blue) * (post.mean(j, 0) - blue) / 1.0 +
                              (post.mean(j, 1) - blue) * (post.mean(j, 1) - blue) / 2.0;
      CHECK(table.anova_chi2[j] == doctest::Approx(expected).epsilon(1e-12));
    }
  }

  SUBCASE("single group skips the cross-group tests") {
    motiv::PosteriorActivities post;
    post.mean = Matrix::Ones(2, 1);
    post.zscores = Matrix::Zero(2, 1);
    post.covariance = {Matrix::Identity(2, 2)};
    post.degenerate.assign(2, false);
    motiv::ModelParams params;
    params.sigma = Vector::Ones(1);
    params.nu = Vector::Ones(1);
    params.tau = Vector::Ones(2);
    params.mu_m = Vector::Zero(2);
    params.mu_p = Vector::Zero(3);
    motiv::TestOptions opts;
    auto table = motiv::run_tests(post, params, nullptr, Matrix::Identity(2, 2),
                                  {"m0", "m1"}, {"a"}, opts);
    CHECK(std::isnan(table.anova_p[0]));
    CHECK(std::isnan(table.offtest_p[0]));
  }
}

TEST_CASE("posterior consistency in the group size") {
  // MAP activities approach the group-mean truth as samples accumulate.
  motiv::GeneratorConfig base;
  base.p = 300;
  base.m = 6;
  base.groups = 2;
  int monotone = 0;
  const int seeds = 10;
  for (uint64_t seed = 0; seed < seeds; ++seed) {
    std::vector<double> errors;
    for (int s : {8, 32, 128}) {
      auto cfg = base;
      cfg.s = s;
      cfg.seed = seed * 31 + 7;
      auto data = motiv::generate(cfg);
      auto ws = motiv::build_workspace(data.dataset, data.loadings);
      motiv::ModelParams params = data.truth;
      params.mu_p = data.truth.mu_p;
      params.mu_m = data.truth.mu_m;
      auto post = motiv::map_activities(ws, params);

      Matrix u_group = Matrix::Zero(6, 2);
      for (int t = 0; t < s; ++t) {
        u_group.col(data.dataset.group_of[static_cast<size_t>(t)]) += data.u_true.col(t);
      }
      for (int a = 0; a < 2; ++a) u_group.col(a) /= data.dataset.group_sizes[static_cast<size_t>(a)];
      errors.push_back((post.mean - u_group).norm());
    }
    if (errors[0] > errors[1] && errors[1] > errors[2]) ++monotone;
  }
  CHECK(monotone >= 9);
}
