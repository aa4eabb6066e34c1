#include "motiv/fisher.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>

namespace motiv {

namespace {

void require_caches(const FitWorkspace& ws) {
  if (ws.q_a.rows() != ws.n() || ws.q_b.rows() != ws.m()) {
    throw std::logic_error("information blocks need the cached eigenpairs of a finished fit");
  }
}

}  // namespace

Matrix fim_tau_block(const FitWorkspace& ws, const ModelParams& params) {
  require_caches(ws);
  const int n = ws.n();
  const int m = ws.m();

  // E = B^T B sqrt(Sigma) Q_B; block k of the trace is alpha_k^2 tr of the
  // Hadamard square of E S_k Q_B^T with S_k the k-th diagonal slice.
  const Vector sqrt_tau = params.tau.cwiseSqrt();
  const Matrix e = ws.btb * (ws.q_b.array().colwise() * sqrt_tau.array()).matrix();

  Matrix acc = Matrix::Zero(m, m);
  Matrix lambda(m, m);
  Vector slice(m);
  for (int k = 0; k < n; ++k) {
    const double a2 = ws.alpha[k] * ws.alpha[k];
    if (a2 == 0.0) continue;
    for (int j = 0; j < m; ++j) slice[j] = 1.0 / (1.0 + ws.alpha[k] * ws.beta[j]);
    lambda.noalias() = e * slice.asDiagonal() * ws.q_b.transpose();
    acc.array() += a2 * (lambda.array() * lambda.transpose().array());
  }

  const Vector inv_sqrt_tau = sqrt_tau.cwiseInverse();
  acc.array() *= 0.5 * (inv_sqrt_tau * inv_sqrt_tau.transpose()).array();
  return acc;
}

Matrix fim_nu_block(const FitWorkspace& ws, const ModelParams& params) {
  require_caches(ws);
  const int n = ws.n();
  const int m = ws.m();
  const int g = ws.groups.g();

  const Vector d = ws.expand_sigma(params.sigma);
  const Vector sqrt_nu_sample = ws.groups.expand(params.nu).cwiseSqrt();
  // K = H^T (H D H^T)^{-1} H sqrt(G) Q_A, the row-space factor shared by all
  // blocks; commutation turns each block into K S_k Q_A^T with S_k diagonal.
  const Matrix k_mat = sandwich_inverse_apply(
      d, (ws.q_a.array().colwise() * sqrt_nu_sample.array()).matrix());

  Matrix acc = Matrix::Zero(n, n);
  Matrix gamma(n, n);
  Vector slice(n);
  for (int k = 0; k < m; ++k) {
    const double b2 = ws.beta[k] * ws.beta[k];
    if (b2 == 0.0) continue;
    for (int i = 0; i < n; ++i) slice[i] = 1.0 / (1.0 + ws.beta[k] * ws.alpha[i]);
    gamma.noalias() = k_mat * slice.asDiagonal() * ws.q_a.transpose();
    acc.array() += b2 * (gamma.array() * gamma.transpose().array());
  }

  Matrix grouped = Matrix::Zero(g, g);
  for (int i = 0; i < n; ++i) {
    const int a = ws.groups.group_of[static_cast<size_t>(i)];
    for (int j = 0; j < n; ++j) {
      grouped(a, ws.groups.group_of[static_cast<size_t>(j)]) += acc(i, j);
    }
  }
  const Vector inv_sqrt_nu = params.nu.cwiseSqrt().cwiseInverse();
  grouped.array() *= 0.5 * (inv_sqrt_nu * inv_sqrt_nu.transpose()).array();
  return grouped;
}

Matrix fim_mixed_block(const FitWorkspace& ws, const ModelParams& params) {
  require_caches(ws);
  const int n = ws.n();
  const int m = ws.m();
  const int g = ws.groups.g();

  const Vector sqrt_tau = params.tau.cwiseSqrt();
  const Vector d = ws.expand_sigma(params.sigma);
  const Vector sqrt_nu_sample = ws.groups.expand(params.nu).cwiseSqrt();

  // psi[i][l] pairs row i of B^T B sqrt(Sigma) Q_B with row i of Q_B;
  // theta[a][t] group-sums the same pairing on the sample side.
  Matrix psi = ws.btb * (ws.q_b.array().colwise() * sqrt_tau.array()).matrix();
  psi.array() *= ws.q_b.array();

  Matrix k_qa = sandwich_inverse_apply(
      d, (ws.q_a.array().colwise() * sqrt_nu_sample.array()).matrix());
  k_qa.array() *= ws.q_a.array();
  Matrix theta = Matrix::Zero(g, n);
  for (int l = 0; l < n; ++l) {
    const int a = ws.groups.group_of[static_cast<size_t>(l)];
    theta.row(a) += k_qa.row(l);
  }

  Matrix out(m, g);
  for (int i = 0; i < m; ++i) {
    for (int a = 0; a < g; ++a) {
      // Element-wise sum over the n*m diagonal; zeta underflows are skipped.
      double total = 0.0;
      for (int t = 0; t < n; ++t) {
        const double th = theta(a, t);
        const double at = ws.alpha[t];
        if (at == 0.0 || th == 0.0) continue;
        for (int l = 0; l < m; ++l) {
          const double s = 1.0 / (1.0 + at * ws.beta[l]);
          const double zeta = s * s * at * ws.beta[l];
          if (zeta < 1e-300) continue;
          total += zeta * psi(i, l) * th;
        }
      }
      out(i, a) = 0.5 * total / (sqrt_tau[i] * std::sqrt(params.nu[a]));
    }
  }
  return out;
}

FimResult assemble_fim(const Matrix& tau_block, const Matrix& nu_block,
                       const Matrix& mixed_block, int fixed_index) {
  const int m = static_cast<int>(tau_block.rows());
  const int g = static_cast<int>(nu_block.rows());
  if (fixed_index < 0 || fixed_index >= g) {
    throw std::invalid_argument("assemble_fim: fixed_index out of range");
  }

  FimResult res;
  res.fixed_index = fixed_index;
  res.n_motifs = m;
  res.n_groups = g;

  const int dim = m + g - 1;
  res.matrix.resize(dim, dim);
  res.matrix.topLeftCorner(m, m) = 0.5 * (tau_block + tau_block.transpose());

  std::vector<int> free_groups;
  for (int a = 0; a < g; ++a) {
    if (a != fixed_index) free_groups.push_back(a);
  }
  for (size_t x = 0; x < free_groups.size(); ++x) {
    const int a = free_groups[x];
    res.matrix.block(0, m + static_cast<int>(x), m, 1) = mixed_block.col(a);
    res.matrix.block(m + static_cast<int>(x), 0, 1, m) = mixed_block.col(a).transpose();
    for (size_t y = 0; y < free_groups.size(); ++y) {
      res.matrix(m + static_cast<int>(x), m + static_cast<int>(y)) =
          0.5 * (nu_block(a, free_groups[y]) + nu_block(free_groups[y], a));
    }
  }

  Eigen::LLT<Matrix> llt(res.matrix);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("information matrix is not positive definite: non-identifiable fit");
  }
  res.inverse = llt.solve(Matrix::Identity(dim, dim));
  return res;
}

}  // namespace motiv
