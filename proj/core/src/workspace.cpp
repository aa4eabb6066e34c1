#include "motiv/workspace.hpp"

#include <Eigen/Eigenvalues>

#include <stdexcept>

namespace motiv {

GroupIndex GroupIndex::from_dataset(const ExpressionDataset& dataset) {
  GroupIndex gi;
  gi.group_of = dataset.group_of;
  gi.sizes = dataset.group_sizes;
  gi.members = dataset.samples_by_group();
  return gi;
}

Vector GroupIndex::expand(const Vector& per_group) const {
  Vector out(n());
  for (int i = 0; i < n(); ++i) out[i] = per_group[group_of[static_cast<size_t>(i)]];
  return out;
}

Vector GroupIndex::reduce(const Vector& per_sample) const {
  Vector out = Vector::Zero(g());
  for (int i = 0; i < n(); ++i) out[group_of[static_cast<size_t>(i)]] += per_sample[i];
  return out;
}

FitWorkspace build_workspace(const ExpressionDataset& dataset, const MotifLoadings& loadings) {
  if (loadings.n_promoters() != dataset.n_promoters()) {
    throw std::invalid_argument("loadings and dataset disagree on promoter count");
  }
  if (dataset.n_samples() < 2) {
    throw std::runtime_error("at least two samples are required");
  }

  FitWorkspace ws{GroupIndex::from_dataset(dataset),
                  HelmertOperator(dataset.n_promoters()),
                  HelmertOperator(dataset.n_samples())};

  ws.y_centered = ws.h_p.apply_left(dataset.values);
  ws.b_centered = ws.h_p.apply_left(loadings.values);
  ws.y_double = ws.h_n.apply_right_transpose(ws.y_centered);

  ComplementBuild cb = build_complement(ws.b_centered);
  ws.complement = std::move(cb.complement);
  ws.qc = std::move(cb.qc);
  ws.svd_s = std::move(cb.svd_s);
  ws.svd_v = std::move(cb.svd_v);
  ws.rank = cb.rank;

  ws.y_reml = ws.complement.apply(ws.y_double);
  ws.btb.noalias() = ws.b_centered.transpose() * ws.b_centered;

  // (Q_N^T Y)^T (Q_N^T Y) = Y^T Y - (Q_C^T Y)^T (Q_C^T Y), no projection needed.
  const Matrix qcy = ws.qc.transpose() * ws.y_centered;
  ws.reml_gram.noalias() = ws.y_centered.transpose() * ws.y_centered;
  ws.reml_gram.noalias() -= qcy.transpose() * qcy;

  return ws;
}

void fill_noise_caches(FitWorkspace& ws, const Vector& sigma) {
  if (sigma.size() != ws.groups.g()) {
    throw std::invalid_argument("sigma size does not match group count");
  }
  const Vector d = ws.expand_sigma(sigma);
  const Matrix bty = ws.b_centered.transpose() * ws.y_centered;  // m x n
  ws.z_cache = sandwich_inverse_apply(d, bty.transpose()).transpose();

  const Matrix ysw = sandwich_inverse_apply(d, ws.y_centered.transpose());  // n x p
  ws.ydouble_whitened_sqnorm = (ws.y_centered.transpose().array() * ysw.array()).sum();
  ws.sigma_cached = sigma;
}

void eigen_group_sandwich(const GroupIndex& groups, const Vector& sigma, const Vector& nu,
                          Matrix& q_a, Vector& alpha) {
  const int n = groups.n();
  const int g = groups.g();

  double omega = 0.0;
  for (int a = 0; a < g; ++a) omega += groups.sizes[static_cast<size_t>(a)] / sigma[a];

  // The operator is diag(w) - (1/omega) u u^T with w and u constant within
  // groups, so within-group contrasts are eigenvectors outright and the rest
  // collapses onto the g group-uniform directions.
  Vector w(g), u(g);
  for (int a = 0; a < g; ++a) {
    w[a] = nu[a] / sigma[a];
    u[a] = std::sqrt(nu[a]) / sigma[a];
  }

  Matrix small = Matrix::Zero(g, g);
  for (int a = 0; a < g; ++a) {
    const double na = groups.sizes[static_cast<size_t>(a)];
    for (int b = 0; b < g; ++b) {
      const double nb = groups.sizes[static_cast<size_t>(b)];
      small(a, b) = -(u[a] * u[b]) * std::sqrt(na * nb) / omega;
    }
    small(a, a) += w[a];
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(small);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("group-sandwich eigendecomposition failed");
  }

  q_a = Matrix::Zero(n, n);
  alpha.resize(n);
  for (int c = 0; c < g; ++c) {
    alpha[c] = std::max(0.0, es.eigenvalues()[c]);
    for (int a = 0; a < g; ++a) {
      const double coef = es.eigenvectors()(a, c) /
                          std::sqrt(static_cast<double>(groups.sizes[static_cast<size_t>(a)]));
      for (int idx : groups.members[static_cast<size_t>(a)]) q_a(idx, c) = coef;
    }
  }
  int col = g;
  for (int a = 0; a < g; ++a) {
    const int na = groups.sizes[static_cast<size_t>(a)];
    if (na < 2) continue;
    const Matrix contrasts = HelmertOperator::dense(na);  // (na-1) x na
    for (int c = 0; c < na - 1; ++c, ++col) {
      alpha[col] = w[a];
      for (int t = 0; t < na; ++t) {
        q_a(groups.members[static_cast<size_t>(a)][static_cast<size_t>(t)], col) = contrasts(c, t);
      }
    }
  }
}

}  // namespace motiv
