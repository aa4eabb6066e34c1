#include "motiv/ortho.hpp"

#include "oracles.hpp"

#include <doctest.h>

using motiv::HelmertOperator;
using motiv::Matrix;
using motiv::Vector;

TEST_CASE("centering operator annihilates constants") {
  HelmertOperator op(2);
  Matrix x(2, 1);
  x << 1.0, 1.0;
  const Matrix res = op.apply_left(x);
  CHECK(res(0, 0) == doctest::Approx(0.0).epsilon(1e-15));

  x << 1.0, 0.0;
  CHECK(op.apply_left(x)(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("centering operator matches its dense form") {
  motiv::Rng rng(7);
  for (int k : {2, 3, 4, 9, 33, 64}) {
    Matrix x(k, 5);
    for (int c = 0; c < 5; ++c) {
      for (int i = 0; i < k; ++i) x(i, c) = rng.normal();
    }
    const Matrix h = HelmertOperator::dense(k);
    HelmertOperator op(k);
    CHECK((op.apply_left(x) - h * x).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((op.apply_right_transpose(x.transpose()) - x.transpose() * h.transpose())
              .cwiseAbs()
              .maxCoeff() < 1e-12);

    Matrix z(k - 1, 5);
    for (int c = 0; c < 5; ++c) {
      for (int i = 0; i < k - 1; ++i) z(i, c) = rng.normal();
    }
    CHECK((op.apply_left_transpose(z) - h.transpose() * z).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((op.apply_right(z.transpose()) - z.transpose() * h).cwiseAbs().maxCoeff() < 1e-12);

    // Semi-orthogonality and the centering factorization.
    CHECK((h * h.transpose() - Matrix::Identity(k - 1, k - 1)).cwiseAbs().maxCoeff() < 1e-12);
    const Matrix centering = Matrix::Identity(k, k) - Matrix::Constant(k, k, 1.0 / k);
    CHECK((h.transpose() * h - centering).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("left application followed by its transpose centers") {
  motiv::Rng rng(21);
  for (int k : {2, 5, 17}) {
    HelmertOperator op(k);
    Vector v(k);
    for (int i = 0; i < k; ++i) v[i] = rng.normal();
    const Matrix res = op.apply_left_transpose(op.apply_left(v));
    const Vector expected = v.array() - v.mean();
    CHECK((res.col(0) - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("diagonal sandwich inverse application") {
  SUBCASE("identity weights reduce to centering") {
    Vector d = Vector::Ones(6);
    Vector v = oracle::random_positive(6, 3);
    const Vector res = motiv::sandwich_inverse_apply(d, v);
    const Vector expected = v.array() - v.mean();
    CHECK((res - expected).cwiseAbs().maxCoeff() < 1e-13);
  }

  SUBCASE("two point example") {
    Vector d(2), v(2);
    d << 1.0, 2.0;
    v << 1.0, 0.0;
    const Vector res = motiv::sandwich_inverse_apply(d, v);
    CHECK(res[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(res[1] == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  }

  SUBCASE("matches dense computation") {
    for (uint64_t seed : {11u, 12u, 13u}) {
      const int k = 5;
      const Vector d = oracle::random_positive(k, seed);
      const Vector v = oracle::random_positive(k, seed + 100, -2.0, 2.0);
      const Matrix h = HelmertOperator::dense(k);
      const Matrix mid = (h * d.asDiagonal() * h.transpose()).inverse();
      const Vector expected = h.transpose() * mid * h * v;
      CHECK((motiv::sandwich_inverse_apply(d, v) - expected).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  SUBCASE("rejects non-positive weights") {
    Vector d(3), v(3);
    d << 1.0, 0.0, 2.0;
    v.setOnes();
    CHECK_THROWS(motiv::sandwich_inverse_apply(d, v));
  }
}

TEST_CASE("diagonal sandwich log-determinant") {
  CHECK(motiv::sandwich_logdet(Vector::Ones(7)) == doctest::Approx(0.0).epsilon(1e-14));

  Vector d(3);
  d << 1.0, 2.0, 3.0;
  CHECK(motiv::sandwich_logdet(d) == doctest::Approx(std::log(11.0 / 3.0)).epsilon(1e-12));

  SUBCASE("dense agreement across sizes") {
    for (int k = 2; k <= 64; k += 7) {
      const Vector dd = oracle::random_positive(k, static_cast<uint64_t>(k) * 13 + 1);
      const Matrix h = HelmertOperator::dense(k);
      const Matrix mid = h * dd.asDiagonal() * h.transpose();
      const double expected = std::log(mid.determinant());
      CHECK(motiv::sandwich_logdet(dd) == doctest::Approx(expected).epsilon(1e-9));
    }
  }

  SUBCASE("scaling homogeneity") {
    const int k = 9;
    const Vector dd = oracle::random_positive(k, 77);
    const double c = 3.7;
    CHECK(motiv::sandwich_logdet(c * dd) - motiv::sandwich_logdet(dd) ==
          doctest::Approx((k - 1) * std::log(c)).epsilon(1e-12));
  }

  SUBCASE("both closed forms of the inverse prefactor coincide") {
    // 1/(1' d^-1) equals det(D) / (k det(H D H^T)).
    const int k = 6;
    const Vector dd = oracle::random_positive(k, 99);
    const double lhs = 1.0 / dd.cwiseInverse().sum();
    const double rhs =
        std::exp(dd.array().log().sum() - motiv::sandwich_logdet(dd)) / static_cast<double>(k);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("scaled centering identity") {
  // sqrt(D) H^T H sqrt(D) v equals (D - d^1/2 d^1/2T / k) v.
  const int k = 8;
  const Vector d = oracle::random_positive(k, 5);
  const Vector v = oracle::random_positive(k, 6, -1.0, 1.0);
  HelmertOperator op(k);
  const Vector sq = d.cwiseSqrt();
  const Matrix inner = op.apply_left_transpose(op.apply_left(sq.cwiseProduct(v)));
  const Vector lhs = sq.cwiseProduct(inner.col(0));
  const Vector rhs = d.cwiseProduct(v) - sq * (sq.dot(v) / k);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("push-through, Woodbury and determinant lemma on random instances") {
  motiv::Rng rng(31);
  for (int rep = 0; rep < 5; ++rep) {
    Matrix a(6, 3);
    for (int j = 0; j < 3; ++j) {
      for (int i = 0; i < 6; ++i) a(i, j) = rng.normal();
    }
    const double sigma = rng.uniform(0.5, 2.0);
    const Matrix i6 = Matrix::Identity(6, 6);
    const Matrix i3 = Matrix::Identity(3, 3);

    const Matrix push_lhs = a * (a.transpose() * a + i3).inverse();
    const Matrix push_rhs = (a * a.transpose() + i6).inverse() * a;
    CHECK((push_lhs - push_rhs).cwiseAbs().maxCoeff() < 1e-10);

    const Matrix wood_lhs = (a * a.transpose() + sigma * i6).inverse();
    const Matrix wood_rhs =
        i6 / sigma - a * (sigma * i3 + a.transpose() * a).inverse() * a.transpose() / sigma;
    CHECK((wood_lhs - wood_rhs).cwiseAbs().maxCoeff() < 1e-10);

    const double det_lhs = (sigma * i6 + a * a.transpose()).determinant();
    const double det_rhs =
        (i3 + a.transpose() * a / sigma).determinant() * std::pow(sigma, 6);
    const double det_rhs2 =
        (sigma * i3 + a.transpose() * a).determinant() * std::pow(sigma, 3);
    CHECK(det_lhs == doctest::Approx(det_rhs).epsilon(1e-9));
    CHECK(det_lhs == doctest::Approx(det_rhs2).epsilon(1e-9));
  }
}

TEST_CASE("orthogonal complement construction") {
  SUBCASE("axis aligned loading") {
    Matrix b = Matrix::Zero(3, 1);
    b(0, 0) = 1.0;
    auto cb = motiv::build_complement(b);
    CHECK(cb.rank == 1);
    // Complement applied to the loading column vanishes.
    CHECK(cb.complement.apply(b).cwiseAbs().maxCoeff() < 1e-14);
    // Complement rows recover the rest of any vector up to rotation.
    Matrix x(3, 2);
    x << 1, 2, 3, 4, 5, 6;
    const Matrix qn = oracle::dense_complement(b, 1);
    const Matrix got = cb.complement.apply(x);
    // Compare projectors, not bases (the basis is only unique up to rotation).
    const Matrix proj_got = cb.complement.apply_adjoint(got);
    const Matrix proj_want = qn * (qn.transpose() * x);
    CHECK((proj_got - proj_want).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("random full rank") {
    const int p = 50, m = 8;
    motiv::Rng rng(42);
    Matrix b(p, m);
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < p; ++i) b(i, j) = rng.normal();
    }
    auto cb = motiv::build_complement(b);
    CHECK(cb.rank == m);

    CHECK(cb.complement.apply(b).cwiseAbs().maxCoeff() < 1e-10);

    // Probe-based orthonormality of the implicit complement.
    Matrix probes(p - m, 6);
    for (int c = 0; c < 6; ++c) {
      for (int i = 0; i < p - m; ++i) probes(i, c) = rng.normal();
    }
    const Matrix round_trip = cb.complement.apply(cb.complement.apply_adjoint(probes));
    CHECK((round_trip - probes).cwiseAbs().maxCoeff() < 1e-10);

    // Compare subspace projectors against the dense SVD complement.
    Matrix x(p, 4);
    for (int c = 0; c < 4; ++c) {
      for (int i = 0; i < p; ++i) x(i, c) = rng.normal();
    }
    const Matrix qn = oracle::dense_complement(b, m);
    const Matrix proj_got = cb.complement.apply_adjoint(cb.complement.apply(x));
    const Matrix proj_want = qn * (qn.transpose() * x);
    CHECK((proj_got - proj_want).cwiseAbs().maxCoeff() < 1e-10);

    // Reflections map the column basis onto the leading coordinate directions.
    const Matrix mapped = cb.complement.apply_q_transpose(cb.qc);
    CHECK(mapped.bottomRows(p - m).cwiseAbs().maxCoeff() < 1e-10);
    const Matrix top = mapped.topRows(m);
    CHECK((top.cwiseAbs() - Matrix::Identity(m, m)).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("duplicated column drops the rank") {
    const int p = 12, m = 4;
    motiv::Rng rng(5);
    Matrix b(p, m);
    for (int j = 0; j < m - 1; ++j) {
      for (int i = 0; i < p; ++i) b(i, j) = rng.normal();
    }
    b.col(m - 1) = b.col(0);
    auto cb = motiv::build_complement(b);
    CHECK(cb.rank == m - 1);
  }

  SUBCASE("zero loading matrix is rejected") {
    CHECK_THROWS(motiv::build_complement(Matrix::Zero(5, 2)));
  }

  SUBCASE("zero width input") {
    Matrix b(6, 2);
    b.setRandom();
    auto cb = motiv::build_complement(b);
    Matrix empty(6, 0);
    const Matrix res = cb.complement.apply(empty);
    CHECK(res.rows() == 6 - cb.rank);
    CHECK(res.cols() == 0);
  }
}

TEST_CASE("complement survives large rank instances") {
  const int p = 500, m = 60;
  motiv::Rng rng(1234);
  Matrix b(p, m);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < p; ++i) b(i, j) = rng.uniform(0.1, 1.1);
  }
  auto cb = motiv::build_complement(b);
  const double bnorm = b.norm();
  CHECK(cb.complement.apply(b).norm() <= 1e-9 * bnorm);
}

TEST_CASE("commutation permutation") {
  SUBCASE("explicit small case") {
    const auto pi = motiv::commutation_permutation(2, 3);
    const std::vector<int> expected{0, 2, 4, 1, 3, 5};
    CHECK(pi == expected);
  }

  SUBCASE("degenerate sizes give the identity") {
    for (auto [n, m] : {std::pair{1, 5}, std::pair{4, 1}}) {
      const auto pi = motiv::commutation_permutation(n, m);
      for (size_t i = 0; i < pi.size(); ++i) CHECK(pi[i] == static_cast<int>(i));
    }
  }

  SUBCASE("conjugation permutes the diagonal") {
    const int n = 3, m = 4;
    const Vector s = oracle::random_positive(n * m, 17);
    const Matrix c = oracle::commutation(n, m);
    const Matrix conj = c * s.asDiagonal() * c.transpose();
    CHECK((conj - Matrix(conj.diagonal().asDiagonal())).cwiseAbs().maxCoeff() < 1e-14);
    const auto pi = motiv::commutation_permutation(n, m);
    for (int i = 0; i < n * m; ++i) {
      CHECK(conj(i, i) == doctest::Approx(s[pi[static_cast<size_t>(i)]]).epsilon(1e-14));
    }
  }
}
