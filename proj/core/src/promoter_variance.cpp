#include "motiv/estimation.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace motiv {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

/// The doubly projected residual model: fixed transforms plus data, shared
/// between the objective/gradient evaluations.
struct KModel {
  GroupIndex groups;
  HelmertOperator h_n;
  Matrix y_right;      // raw promoters x (n-1), expression right-transformed
  Matrix fbar;         // (r+1) x raw promoters, complement rows of the row transform
  int df_rows;         // (raw promoters - 1) - r
  int n;

  explicit KModel(const ExpressionDataset& dataset, const MotifLoadings& loadings)
      : groups(GroupIndex::from_dataset(dataset)),
        h_n(dataset.n_samples()),
        n(dataset.n_samples()) {
    HelmertOperator h_p(dataset.n_promoters());
    const Matrix b_centered = h_p.apply_left(loadings.values);
    ComplementBuild cb = build_complement(b_centered);
    const int praw = dataset.n_promoters();
    df_rows = (praw - 1) - cb.rank;
    if (df_rows <= 0) {
      throw std::runtime_error("loadings leave no residual dimensions for variance estimation");
    }

    y_right = h_n.apply_right_transpose(dataset.values);

    // Rows completing Q_N^T H_p to an orthogonal basis: Q_C^T H_p plus the
    // constant direction.
    fbar.resize(cb.rank + 1, praw);
    fbar.topRows(cb.rank) = h_p.apply_left_transpose(cb.qc).transpose();
    fbar.row(cb.rank).setConstant(1.0 / std::sqrt(static_cast<double>(praw)));
  }

  /// Applies (H_n D H_n^T)^{-1} to each column of x.
  Matrix col_inverse(const Vector& d, const Matrix& x) const {
    return h_n.apply_left(sandwich_inverse_apply(d, h_n.apply_left_transpose(x)));
  }

  double eval(const Vector& k, const Vector& sigma, Vector* grad_k, Vector* grad_sigma) const {
    const int praw = static_cast<int>(k.size());
    const int g = groups.g();
    const Vector kinv = k.cwiseInverse();
    const Vector d = groups.expand(sigma);

    // P(K) y_right with P = K^{-1} - K^{-1} Fbar^T Phi^{-1} Fbar K^{-1}.
    const Matrix kinv_y = y_right.array().colwise() * kinv.array();
    const Matrix fk = fbar * kinv_y;  // (r+1) x (n-1)
    Matrix phi = fbar * (fbar.array().rowwise() * kinv.transpose().array()).matrix().transpose();
    Eigen::LDLT<Matrix> phi_ldlt(phi);
    if (phi_ldlt.info() != Eigen::Success) {
      throw std::runtime_error("promoter-variance complement system is not positive definite");
    }
    const Matrix fbar_kinv = (fbar.array().rowwise() * kinv.transpose().array()).matrix();
    Matrix resid = kinv_y;
    resid.noalias() -= fbar_kinv.transpose() * phi_ldlt.solve(fk);

    const Matrix col_inv_y = col_inverse(d, y_right.transpose()).transpose();  // praw x (n-1)
    const double quad = (resid.array() * col_inv_y.array()).sum();

    double row_logdet = k.array().log().sum();
    {
      const Vector diag = phi_ldlt.vectorD();
      if ((diag.array() <= 0.0).any()) {
        throw std::runtime_error("promoter-variance complement system lost positive definiteness");
      }
      row_logdet += diag.array().log().sum();
    }
    const double col_logdet = sandwich_logdet(d);

    const double value = 0.5 * (quad + (n - 1) * row_logdet + df_rows * col_logdet +
                                static_cast<double>(df_rows) * (n - 1) * kLog2Pi);

    if (grad_k) {
      const Matrix omega_resid = col_inverse(d, resid.transpose()).transpose();  // praw x (n-1)
      Vector gq(praw);
      for (int i = 0; i < praw; ++i) gq[i] = -resid.row(i).dot(omega_resid.row(i));

      const Matrix solved = phi_ldlt.solve(fbar);  // (r+1) x praw
      Vector proj_diag(praw);
      for (int i = 0; i < praw; ++i) proj_diag[i] = fbar.col(i).dot(solved.col(i));
      grad_k->resize(praw);
      for (int i = 0; i < praw; ++i) {
        const double det_part = 1.0 / k[i] - proj_diag[i] / (k[i] * k[i]);
        (*grad_k)[i] = 0.5 * (gq[i] + (n - 1) * det_part);
      }
    }
    if (grad_sigma) {
      const Matrix u1 = sandwich_inverse_apply(d, h_n.apply_left_transpose(y_right.transpose()));
      const Matrix u2 = sandwich_inverse_apply(d, h_n.apply_left_transpose(resid.transpose()));
      Vector per_sample(n);
      for (int i = 0; i < n; ++i) per_sample[i] = u1.row(i).dot(u2.row(i));
      const Vector quad_part = groups.reduce(per_sample);

      const double omega = (groups.reduce(Vector::Ones(n)).array() / sigma.array()).sum();
      grad_sigma->resize(g);
      for (int a = 0; a < g; ++a) {
        const double na = groups.sizes[static_cast<size_t>(a)];
        const double det_part = na / sigma[a] - na / (sigma[a] * sigma[a] * omega);
        (*grad_sigma)[a] = 0.5 * (-quad_part[a] + df_rows * det_part);
      }
    }
    return value;
  }
};

}  // namespace

double promoter_variance_log_density(const ExpressionDataset& dataset,
                                     const MotifLoadings& loadings, const Vector& k,
                                     const Vector& sigma) {
  KModel model(dataset, loadings);
  return -model.eval(k, sigma, nullptr, nullptr);
}

Vector estimate_promoter_variances(const ExpressionDataset& dataset,
                                   const MotifLoadings& loadings, const OptimizerConfig& cfg) {
  if (dataset.n_samples() < 16) {
    warn("fewer than 16 samples; per-promoter variance estimates may be unreliable");
  }

  // Zero-variance promoters carry no information about their own variance
  // and must not participate in the fit.
  std::vector<int> kept;
  for (int i = 0; i < dataset.n_promoters(); ++i) {
    const double mean = dataset.values.row(i).mean();
    if ((dataset.values.row(i).array() - mean).abs().maxCoeff() > 0.0) {
      kept.push_back(i);
    } else {
      warn("excluding zero-variance promoter '" +
           dataset.promoter_ids[static_cast<size_t>(i)] + "' from variance estimation");
    }
  }
  if (static_cast<int>(kept.size()) < dataset.n_promoters()) {
    ExpressionDataset sub = dataset;
    MotifLoadings subl = loadings;
    sub.values.resize(static_cast<Eigen::Index>(kept.size()), dataset.n_samples());
    subl.values.resize(static_cast<Eigen::Index>(kept.size()), loadings.n_motifs());
    sub.promoter_ids.clear();
    for (size_t t = 0; t < kept.size(); ++t) {
      sub.values.row(static_cast<Eigen::Index>(t)) = dataset.values.row(kept[t]);
      subl.values.row(static_cast<Eigen::Index>(t)) = loadings.values.row(kept[t]);
      sub.promoter_ids.push_back(dataset.promoter_ids[static_cast<size_t>(kept[t])]);
    }
    subl.motif_ids = loadings.motif_ids;
    Vector sub_k = estimate_promoter_variances(sub, subl, cfg);
    Vector full = Vector::Ones(dataset.n_promoters());
    for (size_t t = 0; t < kept.size(); ++t) full[kept[t]] = sub_k[static_cast<Eigen::Index>(t)];
    return full;
  }

  KModel model(dataset, loadings);
  const int praw = dataset.n_promoters();
  const int g = model.groups.g();
  const int n = dataset.n_samples();

  Vector theta0(praw + g);
  {
    Vector rowvar(praw);
    for (int i = 0; i < praw; ++i) rowvar[i] = model.y_right.row(i).squaredNorm() / (n - 1);
    const double logmean = rowvar.array().log().mean();
    for (int i = 0; i < praw; ++i) theta0[i] = std::log(rowvar[i]) - logmean;
    const double scale = std::exp(logmean);
    for (int a = 0; a < g; ++a) theta0[praw + a] = std::log(scale);
  }

  auto objective = [&](const Vector& theta, Vector& grad) {
    const Vector k = theta.head(praw).array().exp();
    const Vector sigma = theta.tail(g).array().exp();
    Vector gk, gsig;
    const double value = model.eval(k, sigma, &gk, &gsig);
    grad.resize(praw + g);
    grad.head(praw) = gk.array() * k.array();
    grad.tail(g) = gsig.array() * sigma.array();
    return value;
  };

  OptimResult res = minimize_lbfgs(objective, theta0, cfg);
  if (!res.converged) {
    std::ostringstream msg;
    msg << "promoter-variance fit did not converge after " << res.iterations
        << " iterations (gradient sup-norm " << res.grad_norm << ")";
    throw std::runtime_error(msg.str());
  }

  Vector k = res.x.head(praw).array().exp();
  k /= std::exp(k.array().log().mean());  // the overall scale belongs to sigma
  return k;
}

}  // namespace motiv
