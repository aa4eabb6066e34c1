#include "motiv/estimation.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace motiv {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

/// Group-collapsed sufficient statistics of the projected data: column-norm
/// totals and the group-block sums of the Gram matrix.
struct RemlStats {
  Vector col_sq;   // g, sum of squared column norms per group
  Matrix gram;     // g x g block sums
  Vector sizes;    // g
  int df_rows;     // p - r
  int n;
};

RemlStats reml_stats(const FitWorkspace& ws) {
  const int g = ws.groups.g();
  RemlStats st;
  st.col_sq = Vector::Zero(g);
  st.gram = Matrix::Zero(g, g);
  st.sizes.resize(g);
  st.df_rows = ws.p() - ws.rank;
  st.n = ws.n();
  for (int a = 0; a < g; ++a) st.sizes[a] = ws.groups.sizes[static_cast<size_t>(a)];
  for (int i = 0; i < ws.n(); ++i) {
    const int a = ws.groups.group_of[static_cast<size_t>(i)];
    st.col_sq[a] += ws.reml_gram(i, i);
    for (int j = 0; j < ws.n(); ++j) {
      st.gram(a, ws.groups.group_of[static_cast<size_t>(j)]) += ws.reml_gram(i, j);
    }
  }
  return st;
}

double reml_neg_density(const RemlStats& st, const Vector& sigma, Vector* grad) {
  const int g = static_cast<int>(sigma.size());
  const double omega = (st.sizes.array() / sigma.array()).sum();

  double trace = 0.0, quad = 0.0, logdet = -std::log(static_cast<double>(st.n));
  for (int a = 0; a < g; ++a) {
    trace += st.col_sq[a] / sigma[a];
    logdet += st.sizes[a] * std::log(sigma[a]);
    for (int b = 0; b < g; ++b) quad += st.gram(a, b) / (sigma[a] * sigma[b]);
  }
  logdet += std::log(omega);
  trace -= quad / omega;

  const double df = st.df_rows;
  if (grad) {
    grad->resize(g);
    for (int a = 0; a < g; ++a) {
      const double s2 = sigma[a] * sigma[a];
      double cross = 0.0;
      for (int b = 0; b < g; ++b) cross += st.gram(a, b) / sigma[b];
      const double dtrace =
          -st.col_sq[a] / s2 - quad * st.sizes[a] / (s2 * omega * omega) + 2.0 * cross / (s2 * omega);
      const double dlogdet = st.sizes[a] / sigma[a] - st.sizes[a] / (s2 * omega);
      (*grad)[a] = 0.5 * (dtrace + df * dlogdet);
    }
  }
  return 0.5 * (trace + df * logdet + df * (st.n - 1) * kLog2Pi);
}

}  // namespace

double reml_log_density(const FitWorkspace& ws, const Vector& sigma) {
  return -reml_neg_density(reml_stats(ws), sigma, nullptr);
}

Vector reml_negdensity_grad(const FitWorkspace& ws, const Vector& sigma) {
  Vector grad;
  reml_neg_density(reml_stats(ws), sigma, &grad);
  return grad;
}

Vector estimate_D(FitWorkspace& ws, const OptimizerConfig& cfg) {
  const int g = ws.groups.g();
  if (ws.n() < 2) throw std::runtime_error("noise variance estimation needs at least 2 samples");
  for (int a = 0; a < g; ++a) {
    if (ws.groups.sizes[static_cast<size_t>(a)] == 1) {
      warn("group with a single sample; noise variance pooled across promoters");
    }
  }

  const RemlStats st = reml_stats(ws);
  Vector sigma(g);

  if (g == 1) {
    sigma[0] = ws.y_reml.squaredNorm() / (static_cast<double>(st.df_rows) * (st.n - 1));
  } else {
    Vector x0(g);
    const double fallback = ws.y_reml.squaredNorm() / (static_cast<double>(st.df_rows) * (st.n - 1));
    for (int a = 0; a < g; ++a) {
      const double na = st.sizes[a];
      double v = na >= 2.0
                     ? (st.col_sq[a] - st.gram(a, a) / na) / (st.df_rows * (na - 1.0))
                     : fallback;
      x0[a] = std::log(std::max(v, 1e-8 * fallback));
    }
    auto objective = [&](const Vector& theta, Vector& grad) {
      const Vector s = theta.array().exp();
      Vector gs;
      const double value = reml_neg_density(st, s, &gs);
      grad = gs.array() * s.array();  // chain rule into log space
      return value;
    };
    OptimResult res = minimize_lbfgs(objective, x0, cfg);
    if (!res.converged) {
      std::ostringstream msg;
      msg << "noise variance fit did not converge after " << res.iterations
          << " iterations (gradient sup-norm " << res.grad_norm << ")";
      throw std::runtime_error(msg.str());
    }
    sigma = res.x.array().exp();
  }

  fill_noise_caches(ws, sigma);
  return sigma;
}

Vector estimate_mu_p(const FitWorkspace& ws, const Vector& sigma) {
  const Vector d = ws.expand_sigma(sigma);
  const Vector dinv = d.cwiseInverse();
  const double omega = dinv.sum();

  Vector w = ws.y_centered * dinv;            // p
  w.noalias() -= ws.qc * (ws.qc.transpose() * w);
  return ws.h_p.apply_left_transpose(w) / omega;
}

namespace {

/// Shared per-evaluation pieces of the Kronecker likelihood.
struct SigmaGEval {
  Matrix q_a;
  Vector alpha;
  Matrix q_b;
  Vector beta;
};

double sigma_g_eval(const FitWorkspace& ws, const Vector& sigma, const Vector& tau,
                    const Vector& nu, Vector* grad_neg_tau, Vector* grad_neg_nu,
                    SigmaGEval* out) {
  const int n = ws.n();
  const int m = ws.m();
  const int g = ws.groups.g();
  if (ws.sigma_cached.size() != sigma.size() || (ws.sigma_cached - sigma).cwiseAbs().maxCoeff() != 0.0) {
    throw std::logic_error("noise caches were not filled for this sigma");
  }

  SigmaGEval ev;
  eigen_group_sandwich(ws.groups, sigma, nu, ev.q_a, ev.alpha);

  const Vector sqrt_tau = tau.cwiseSqrt();
  Matrix sb = ws.btb;
  sb.array() *= (sqrt_tau * sqrt_tau.transpose()).array();
  Eigen::SelfAdjointEigenSolver<Matrix> es(sb);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("eigendecomposition of the scaled loading Gram failed");
  }
  ev.q_b = es.eigenvectors();
  ev.beta = es.eigenvalues().cwiseMax(0.0);

  const Vector nu_sample = ws.groups.expand(nu);
  const Vector sqrt_nu_sample = nu_sample.cwiseSqrt();

  // W = Q_B^T sqrt(Sigma) Z sqrt(G) Q_A, with Z the fixed noise-whitened cache.
  Matrix scaled = ws.z_cache;
  scaled.array().colwise() *= sqrt_tau.array();
  scaled.array().rowwise() *= sqrt_nu_sample.transpose().array();
  const Matrix w = ev.q_b.transpose() * scaled * ev.q_a;  // m x n

  double quad_reduction = 0.0, logdet = 0.0;
  Matrix m_weights(m, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const double prod = ev.beta[j] * ev.alpha[i];
      const double denom = 1.0 + prod;
      m_weights(j, i) = 1.0 / denom;
      quad_reduction += w(j, i) * w(j, i) / denom;
      logdet += std::log1p(prod);
    }
  }
  const double quad = ws.ydouble_whitened_sqnorm - quad_reduction;
  const double value = 0.5 * (quad + logdet + static_cast<double>(ws.p()) * (n - 1) * kLog2Pi);

  if (grad_neg_tau) {
    const Matrix wm = w.cwiseProduct(m_weights);
    // Quadratic-form part.
    const Matrix lambda_tau = ev.q_b * wm;                      // m x n
    const Vector quad_tau = lambda_tau.array().square().rowwise().sum();
    // Determinant part.
    Matrix zeta = ev.q_b.transpose() * (ws.btb.array().colwise() * sqrt_tau.array()).matrix();
    zeta.array() *= ev.q_b.transpose().array();                 // m x m, column j pairs with tau_j
    Vector phi = Vector::Zero(m);
    for (int k = 0; k < m; ++k) {
      for (int i = 0; i < n; ++i) phi[k] += ev.alpha[i] * m_weights(k, i);
    }
    const Vector det_tau = zeta.transpose() * phi;
    grad_neg_tau->resize(m);
    for (int j = 0; j < m; ++j) {
      (*grad_neg_tau)[j] =
          0.5 * (-quad_tau[j] / tau[j] + det_tau[j] / std::max(sqrt_tau[j], 1e-300));
    }

    const Matrix lambda_nu = wm * ev.q_a.transpose();           // m x n
    Vector col_sq(n);
    for (int i = 0; i < n; ++i) col_sq[i] = lambda_nu.col(i).squaredNorm();
    const Vector quad_nu = ws.groups.reduce(col_sq);

    const Vector d = ws.expand_sigma(sigma);
    Matrix r_mat = sandwich_inverse_apply(
        d, (ev.q_a.array().colwise() * sqrt_nu_sample.array()).matrix());
    r_mat.array() *= ev.q_a.array();                            // n x n
    Vector psi = Vector::Zero(n);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < m; ++k) psi[i] += ev.beta[k] * m_weights(k, i);
    }
    const Vector row_contrib = r_mat * psi;                     // n
    const Vector det_nu = ws.groups.reduce(row_contrib);
    grad_neg_nu->resize(g);
    for (int a = 0; a < g; ++a) {
      (*grad_neg_nu)[a] = 0.5 * (-quad_nu[a] / nu[a] + det_nu[a] / std::sqrt(nu[a]));
    }
  }
  if (out) *out = std::move(ev);
  return value;
}

}  // namespace

double sigma_g_log_density(const FitWorkspace& ws, const Vector& sigma, const Vector& tau,
                           const Vector& nu, Vector* grad_neg_tau, Vector* grad_neg_nu) {
  Vector gt, gn;
  const bool want = grad_neg_tau || grad_neg_nu;
  const double neg = sigma_g_eval(ws, sigma, tau, nu, want ? &gt : nullptr,
                                  want ? &gn : nullptr, nullptr);
  if (grad_neg_tau) *grad_neg_tau = gt;
  if (grad_neg_nu) *grad_neg_nu = gn;
  return -neg;
}

SigmaGFit estimate_sigma_G(FitWorkspace& ws, const Vector& sigma, const OptimizerConfig& cfg,
                           bool estimate_tau) {
  const int m = ws.m();
  const int g = ws.groups.g();

  SigmaGFit fit;
  fit.fixed_index = -1;
  double pinned_value = 0.0;
  if (estimate_tau) {
    int jmin = 0;
    sigma.minCoeff(&jmin);
    fit.fixed_index = jmin;
    pinned_value = sigma[jmin] / 4.0;
  }

  const int n_tau = estimate_tau ? m : 0;
  const int n_nu = estimate_tau ? g - 1 : g;

  auto unpack = [&](const Vector& theta, Vector& tau, Vector& nu) {
    if (estimate_tau) {
      tau = theta.head(m).array().exp();
    } else {
      tau = Vector::Ones(m);
    }
    nu.resize(g);
    int idx = n_tau;
    for (int a = 0; a < g; ++a) {
      if (a == fit.fixed_index) {
        nu[a] = pinned_value;
      } else {
        nu[a] = std::exp(theta[idx++]);
      }
    }
  };

  auto objective = [&](const Vector& theta, Vector& grad) {
    Vector tau, nu, gt, gn;
    unpack(theta, tau, nu);
    const double value = sigma_g_eval(ws, sigma, tau, nu, &gt, &gn, nullptr);
    grad.resize(n_tau + n_nu);
    if (estimate_tau) grad.head(m) = gt.array() * tau.array();
    int idx = n_tau;
    for (int a = 0; a < g; ++a) {
      if (a != fit.fixed_index) grad[idx++] = gn[a] * nu[a];
    }
    return value;
  };

  Vector theta0 = Vector::Zero(n_tau + n_nu);  // tau = nu = 1 at the start
  OptimResult res = minimize_lbfgs(objective, theta0, cfg);
  if (!res.converged) {
    std::ostringstream msg;
    msg << "motif-variance fit did not converge after " << res.iterations
        << " iterations (gradient sup-norm " << res.grad_norm << ")";
    throw std::runtime_error(msg.str());
  }

  unpack(res.x, fit.tau, fit.nu);
  fit.info = res;

  SigmaGEval final_eval;
  sigma_g_eval(ws, sigma, fit.tau, fit.nu, nullptr, nullptr, &final_eval);
  ws.q_a = std::move(final_eval.q_a);
  ws.alpha = std::move(final_eval.alpha);
  ws.q_b = std::move(final_eval.q_b);
  ws.beta = std::move(final_eval.beta);
  return fit;
}

MuMFit estimate_mu_m(const FitWorkspace& ws, const ModelParams& params) {
  const int m = ws.m();
  const int g = ws.groups.g();
  const Vector& tau = params.tau;
  const Vector sqrt_tau = tau.cwiseSqrt();

  Matrix sb = ws.btb;
  sb.array() *= (sqrt_tau * sqrt_tau.transpose()).array();
  Eigen::SelfAdjointEigenSolver<Matrix> es(sb);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("eigendecomposition of the scaled loading Gram failed");
  }
  const Matrix& qb = es.eigenvectors();
  const Vector beta = es.eigenvalues().cwiseMax(0.0);

  // Mean-subtracted data in promoter space.
  Matrix yc = ws.y_centered;
  yc.colwise() -= (ws.h_p.apply_left(params.mu_p)).col(0);
  const Matrix bty = ws.b_centered.transpose() * yc;  // m x n

  const Vector d = ws.expand_sigma(params.sigma);
  // y_hat = sqrt(Sigma) B^T Yc diag(sqrt(nu_i)/sigma_i), reduced to group sums
  // of Q_B^T y_hat columns (sigma, nu are group-constant).
  Matrix qb_bty = qb.transpose() * (bty.array().colwise() * sqrt_tau.array()).matrix();  // m x n
  Matrix group_sums = Matrix::Zero(m, g);
  for (int i = 0; i < ws.n(); ++i) {
    const int a = ws.groups.group_of[static_cast<size_t>(i)];
    group_sums.col(a) += qb_bty.col(i) * (std::sqrt(params.nu[a]) / params.sigma[a]);
  }

  double omega = 0.0;
  Vector gs = Vector::Zero(m);   // diagonal weight accumulated over samples
  Vector h = Vector::Zero(m);    // right-hand side correction in the Q_B basis
  for (int a = 0; a < g; ++a) {
    const double na = ws.groups.sizes[static_cast<size_t>(a)];
    const double ratio = params.sigma[a] / params.nu[a];
    omega += na / params.sigma[a];
    const Vector winv = (beta.array() + ratio).inverse();
    gs += (na / params.sigma[a]) * winv;
    h += (1.0 / std::sqrt(params.nu[a])) * winv.cwiseProduct(group_sums.col(a));
  }

  const Matrix a_mat = (ws.btb.array().colwise() * sqrt_tau.array()).matrix();  // sqrt(Sigma) B^T B
  const Matrix qba = qb.transpose() * a_mat;                                    // m x m
  Matrix info = omega * ws.btb;
  info.noalias() -= qba.transpose() * gs.asDiagonal() * qba;

  Vector rhs = bty * d.cwiseInverse();
  rhs.noalias() -= qba.transpose() * h;

  Eigen::LDLT<Matrix> ldlt(info);
  const Vector diag = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success ||
      diag.minCoeff() <= 1e-12 * std::max(1.0, diag.maxCoeff())) {
    throw std::runtime_error("motif mean system is singular (rank-deficient loadings)");
  }
  MuMFit fit;
  fit.mu_m = ldlt.solve(rhs);
  fit.info = info;
  return fit;
}

}  // namespace motiv
