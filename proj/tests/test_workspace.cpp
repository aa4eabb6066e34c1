#include "motiv/workspace.hpp"

#include "oracles.hpp"

#include <doctest.h>

using motiv::Matrix;
using motiv::Vector;

TEST_CASE("workspace transforms agree with dense operators") {
  auto tiny = oracle::make_tiny(7, 5, 3, 2, 11);
  auto ws = motiv::build_workspace(tiny.dataset, tiny.loadings);

  const Matrix hp = motiv::HelmertOperator::dense(7);
  const Matrix hn = motiv::HelmertOperator::dense(5);
  CHECK((ws.y_centered - hp * tiny.dataset.values).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((ws.y_double - hp * tiny.dataset.values * hn.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((ws.b_centered - hp * tiny.loadings.values).cwiseAbs().maxCoeff() < 1e-12);

  // Complement annihilates the centered loadings.
  CHECK(ws.complement.apply(ws.b_centered).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(ws.y_reml.rows() == ws.p() - ws.rank);

  // Projected Gram identity.
  const Matrix qn = oracle::dense_complement(ws.b_centered, ws.rank);
  const Matrix w = qn.transpose() * ws.y_centered;
  CHECK((ws.reml_gram - w.transpose() * w).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("group sandwich eigendecomposition") {
  auto tiny = oracle::make_tiny(6, 9, 2, 3, 13);
  auto gi = motiv::GroupIndex::from_dataset(tiny.dataset);
  const Vector sigma = oracle::random_positive(3, 21);
  const Vector nu = oracle::random_positive(3, 22);

  Matrix q_a;
  Vector alpha;
  motiv::eigen_group_sandwich(gi, sigma, nu, q_a, alpha);

  CHECK((q_a * q_a.transpose() - Matrix::Identity(9, 9)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(alpha.minCoeff() >= 0.0);

  // Dense reference: sqrt(G) H^T (H D H^T)^{-1} H sqrt(G).
  const Matrix h = motiv::HelmertOperator::dense(9);
  const Vector d = gi.expand(sigma);
  const Vector nus = gi.expand(nu);
  const Matrix mid = (h * d.asDiagonal() * h.transpose()).inverse();
  const Matrix dense = nus.cwiseSqrt().asDiagonal() * h.transpose() * mid * h *
                       nus.cwiseSqrt().asDiagonal();
  const Matrix rebuilt = q_a * alpha.asDiagonal() * q_a.transpose();
  CHECK((rebuilt - dense).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("noise caches match their definitions") {
  auto tiny = oracle::make_tiny(8, 6, 3, 2, 17);
  auto ws = motiv::build_workspace(tiny.dataset, tiny.loadings);
  const Vector sigma = oracle::random_positive(2, 31);
  motiv::fill_noise_caches(ws, sigma);

  const Matrix h = motiv::HelmertOperator::dense(6);
  const Vector d = ws.expand_sigma(sigma);
  const Matrix mid = (h * d.asDiagonal() * h.transpose()).inverse();
  const Matrix sandwich = h.transpose() * mid * h;

  const Matrix z_expected = ws.b_centered.transpose() * ws.y_centered * sandwich;
  CHECK((ws.z_cache - z_expected).cwiseAbs().maxCoeff() < 1e-10);

  const double sq_expected = (ws.y_centered * sandwich * ws.y_centered.transpose()).trace();
  CHECK(ws.ydouble_whitened_sqnorm == doctest::Approx(sq_expected).epsilon(1e-10));
}
