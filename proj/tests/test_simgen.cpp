#include "motiv/simgen.hpp"

#include "motiv/estimation.hpp"
#include "motiv/io.hpp"
#include "motiv/posterior.hpp"
#include "motiv/workspace.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>

namespace fs = std::filesystem;
using motiv::Matrix;
using motiv::Vector;

TEST_CASE("generated shapes and reproducibility") {
  motiv::GeneratorConfig cfg;
  cfg.p = 5000;
  cfg.s = 20;
  cfg.m = 100;
  cfg.variance_ratio = 0.1;
  cfg.seed = 7;
  auto a = motiv::generate(cfg);
  CHECK(a.dataset.values.rows() == 5000);
  CHECK(a.dataset.values.cols() == 20);
  CHECK(a.loadings.values.rows() == 5000);
  CHECK(a.loadings.values.cols() == 100);
  CHECK(a.dataset.n_groups() == 4);

  auto b = motiv::generate(cfg);
  CHECK(a.dataset.values == b.dataset.values);
  CHECK(a.loadings.values == b.loadings.values);
  CHECK(a.u_true == b.u_true);
}

TEST_CASE("zero inactive fraction keeps all variances positive") {
  motiv::GeneratorConfig cfg;
  cfg.p = 100;
  cfg.s = 8;
  cfg.m = 20;
  cfg.zm_frac = 0.0;
  cfg.seed = 3;
  auto data = motiv::generate(cfg);
  CHECK((data.truth.tau.array() > 0.0).all());

  cfg.zm_frac = 0.3;
  auto mixed = motiv::generate(cfg);
  int zeros = 0;
  for (int j = 0; j < 20; ++j) zeros += mixed.truth.tau[j] == 0.0 ? 1 : 0;
  CHECK(zeros == 6);
}

TEST_CASE("empirical variance share tracks the requested ratio") {
  motiv::GeneratorConfig cfg;
  cfg.p = 800;
  cfg.s = 16;
  cfg.m = 30;
  cfg.variance_ratio = 0.15;
  double share_sum = 0.0;
  const int seeds = 50;
  for (uint64_t seed = 0; seed < seeds; ++seed) {
    cfg.seed = seed;
    auto data = motiv::generate(cfg);
    // Decompose the realized matrix: the random-activity part against noise.
    Matrix signal = data.loadings.values * (data.u_true.colwise() - data.truth.mu_m);
    Matrix noise = data.dataset.values;
    noise.colwise() -= data.truth.mu_p;
    noise.rowwise() -= data.mu_n_true.transpose();
    noise -= data.loadings.values * data.u_true;
    const double vs = signal.array().square().mean();
    const double vn = noise.array().square().mean();
    share_sum += vs / (vs + vn);
  }
  CHECK(share_sum / seeds == doctest::Approx(0.15).epsilon(0.2));
  CHECK(std::abs(share_sum / seeds - 0.15) < 0.03);
}

TEST_CASE("generated column covariance approaches the implied one") {
  motiv::GeneratorConfig cfg;
  cfg.p = 5000;
  cfg.s = 10;
  cfg.m = 40;
  cfg.groups = 2;
  cfg.variance_ratio = 0.05;  // keeps the motif-sum fluctuations well inside the bound
  Matrix emp_sum, implied_sum;
  const int seeds = 50;
  for (uint64_t seed = 0; seed < seeds; ++seed) {
    cfg.seed = 1000 + seed;
    auto data = motiv::generate(cfg);
    Matrix resid = data.dataset.values;
    resid.colwise() -= data.truth.mu_p;
    resid.rowwise() -= data.mu_n_true.transpose();
    resid -= data.loadings.values * data.truth.mu_m * Eigen::RowVectorXd::Ones(cfg.s);
    const Matrix emp = resid.transpose() * resid / cfg.p;

    // Implied: diag over samples of (mean_i sum_j B_ij^2 tau_j nu + k_i sigma).
    Matrix implied = Matrix::Zero(cfg.s, cfg.s);
    Vector row_signal = Vector::Zero(cfg.s);
    double b2tau = 0.0;
    for (int j = 0; j < cfg.m; ++j) {
      b2tau += data.truth.tau[j] * data.loadings.values.col(j).squaredNorm();
    }
    b2tau /= cfg.p;
    for (int t = 0; t < cfg.s; ++t) {
      const int a = data.dataset.group_of[static_cast<size_t>(t)];
      implied(t, t) = b2tau * data.truth.nu[a] +
                      data.sample_var.col(t).mean() * data.truth.sigma[a];
    }
    if (seed == 0) {
      emp_sum = emp;
      implied_sum = implied;
    } else {
      emp_sum += emp;
      implied_sum += implied;
    }
  }
  const double rel = (emp_sum - implied_sum).norm() / implied_sum.norm();
  CHECK(rel < 0.05);
}

TEST_CASE("round trip through the on-disk format") {
  motiv::GeneratorConfig cfg;
  cfg.p = 40;
  cfg.s = 8;
  cfg.m = 5;
  cfg.seed = 11;
  cfg.sigma_het = true;
  auto data = motiv::generate(cfg);

  const fs::path dir = fs::temp_directory_path() / "motiv_simgen_test";
  fs::remove_all(dir);
  motiv::write_generated(data, cfg, dir);

  auto ds = motiv::load_dataset(dir / "expression.tsv", dir / "groups.tsv");
  CHECK(ds.values == data.dataset.values);
  CHECK(ds.group_of == data.dataset.group_of);
  auto lo = motiv::load_loadings(dir / "loadings.tsv", ds);
  CHECK(lo.values == data.loadings.values);

  auto truth = motiv::read_truth(dir / "truth");
  CHECK(truth.params.sigma == data.truth.sigma);
  CHECK(truth.u_true == data.u_true);

  auto manifest = motiv::read_manifest(dir / "manifest.txt");
  CHECK(manifest.p == cfg.p);
  CHECK(manifest.sigma_het == cfg.sigma_het);
  CHECK(manifest.seed == cfg.seed);
  fs::remove_all(dir);
}

TEST_CASE("baseline recovers exact linear structure without noise") {
  // Noise-free expression with centered structure: tiny ridge recovers the
  // centered activities up to the null space.
  motiv::Rng rng(5);
  const int p = 60, n = 6, m = 4;
  Matrix b(p, m);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < p; ++i) b(i, j) = rng.uniform(0.1, 1.1);
  }
  Matrix u(m, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < m; ++i) u(i, j) = rng.normal();
  }
  motiv::ExpressionDataset ds;
  ds.values = b * u;
  for (int i = 0; i < p; ++i) ds.promoter_ids.push_back("p" + std::to_string(i));
  for (int j = 0; j < n; ++j) ds.sample_ids.push_back("s" + std::to_string(j));
  ds.group_of.assign(n, 0);
  ds.group_sizes = {n};
  ds.group_labels = {"all"};
  motiv::MotifLoadings lo;
  lo.values = b;
  for (int j = 0; j < m; ++j) lo.motif_ids.push_back("m" + std::to_string(j));

  const Matrix est = motiv::mara_baseline(ds, lo, 1e-10);

  // Compare in prediction space restricted to the double-centered data: the
  // estimate reproduces the centered fit exactly.
  Matrix y = ds.values;
  y.colwise() -= y.rowwise().mean().eval();
  y.rowwise() -= y.colwise().mean().eval();
  Matrix bc = b;
  bc.rowwise() -= b.colwise().mean().eval();
  CHECK((bc * est - y).norm() < 1e-6 * y.norm());
}

TEST_CASE("baseline matches the dense pseudo-inverse at tiny scale") {
  auto tiny = oracle::make_tiny(12, 5, 3, 1, 9);
  const Matrix est = motiv::mara_baseline(tiny.dataset, tiny.loadings, 1e-9);
  Matrix y = tiny.dataset.values;
  y.colwise() -= y.rowwise().mean().eval();
  y.rowwise() -= y.colwise().mean().eval();
  Matrix bc = tiny.loadings.values;
  bc.rowwise() -= bc.colwise().mean().eval();
  const Matrix expected = oracle::dense_pinv(bc) * y;
  CHECK((est - expected).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("evaluation metrics") {
  motiv::GeneratorConfig cfg;
  cfg.p = 300;
  cfg.s = 12;
  cfg.m = 8;
  cfg.groups = 2;
  cfg.seed = 21;
  auto data = motiv::generate(cfg);
  motiv::GroundTruth truth{data.truth, data.u_true};

  SUBCASE("perfect estimates score perfectly") {
    Matrix u_group = Matrix::Zero(cfg.m, 2);
    for (int t = 0; t < cfg.s; ++t) {
      u_group.col(data.dataset.group_of[static_cast<size_t>(t)]) += data.u_true.col(t);
    }
    for (int a = 0; a < 2; ++a) u_group.col(a) /= data.dataset.group_sizes[static_cast<size_t>(a)];

    auto metrics = motiv::evaluate(data.dataset, data.loadings, data.truth, u_group, truth,
                                   0.1, cfg.seed);
    CHECK(metrics.mape_sigma == doctest::Approx(0.0));
    CHECK(metrics.mape_nu == doctest::Approx(0.0));
    CHECK(metrics.activity_pcc == doctest::Approx(1.0).epsilon(1e-10));
  }

  SUBCASE("scale normalization forgives a common factor") {
    auto scaled = data.truth;
    scaled.nu *= 5.0;
    Matrix u_group = Matrix::Zero(cfg.m, 2);
    auto metrics = motiv::evaluate(data.dataset, data.loadings, scaled, u_group, truth,
                                   0.1, cfg.seed);
    CHECK(metrics.mape_nu == doctest::Approx(0.0).epsilon(1e-12));
  }
}
