#include "motiv/ortho.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace motiv {

namespace {

// Row j (1-based) of the operator: weight * [1/j ... 1/j, -1, 0 ...] with
// weight = sqrt(j / (j + 1)).
double row_weight(int j) { return std::sqrt(static_cast<double>(j) / (j + 1.0)); }

}  // namespace

HelmertOperator::HelmertOperator(int k) : k_(k) {
  if (k < 2) throw std::invalid_argument("centering operator needs dimension >= 2");
}

Matrix HelmertOperator::apply_left(const Matrix& x) const {
  if (x.rows() != k_) throw std::invalid_argument("apply_left: row count mismatch");
  Matrix res(k_ - 1, x.cols());
  Eigen::RowVectorXd prefix = Eigen::RowVectorXd::Zero(x.cols());
  for (int j = 1; j < k_; ++j) {
    prefix += x.row(j - 1);
    res.row(j - 1) = row_weight(j) * (prefix / static_cast<double>(j) - x.row(j));
  }
  return res;
}

Matrix HelmertOperator::apply_left_transpose(const Matrix& z) const {
  if (z.rows() != k_ - 1) throw std::invalid_argument("apply_left_transpose: row count mismatch");
  Matrix res(k_, z.cols());
  Eigen::RowVectorXd suffix = Eigen::RowVectorXd::Zero(z.cols());
  // Row i of the result is sum_{j > i} (w_j / j) z_{j-1} - w_i z_{i-1}.
  for (int i = k_ - 1; i >= 0; --i) {
    res.row(i) = suffix;
    if (i >= 1) {
      res.row(i) -= row_weight(i) * z.row(i - 1);
      suffix += (row_weight(i) / static_cast<double>(i)) * z.row(i - 1);
    }
  }
  return res;
}

Matrix HelmertOperator::apply_right_transpose(const Matrix& x) const {
  if (x.cols() != k_) throw std::invalid_argument("apply_right_transpose: column count mismatch");
  Matrix res(x.rows(), k_ - 1);
  Vector prefix = Vector::Zero(x.rows());
  for (int j = 1; j < k_; ++j) {
    prefix += x.col(j - 1);
    res.col(j - 1) = row_weight(j) * (prefix / static_cast<double>(j) - x.col(j));
  }
  return res;
}

Matrix HelmertOperator::apply_right(const Matrix& z) const {
  if (z.cols() != k_ - 1) throw std::invalid_argument("apply_right: column count mismatch");
  Matrix res(z.rows(), k_);
  Vector suffix = Vector::Zero(z.rows());
  for (int i = k_ - 1; i >= 0; --i) {
    res.col(i) = suffix;
    if (i >= 1) {
      res.col(i) -= row_weight(i) * z.col(i - 1);
      suffix += (row_weight(i) / static_cast<double>(i)) * z.col(i - 1);
    }
  }
  return res;
}

Matrix HelmertOperator::dense(int k) {
  Matrix h = Matrix::Zero(k - 1, k);
  for (int j = 1; j < k; ++j) {
    const double w = row_weight(j);
    for (int i = 0; i < j; ++i) h(j - 1, i) = w / static_cast<double>(j);
    h(j - 1, j) = -w;
  }
  return h;
}

Matrix sandwich_inverse_apply(const Vector& d, const Matrix& v) {
  if (d.size() != v.rows()) throw std::invalid_argument("sandwich_inverse_apply: size mismatch");
  if ((d.array() <= 0.0).any()) {
    throw std::invalid_argument("sandwich_inverse_apply: entries of d must be positive");
  }
  const Vector dinv = d.cwiseInverse();
  const double omega = dinv.sum();
  Matrix res = v.array().colwise() * dinv.array();
  const Eigen::RowVectorXd weights = (dinv.transpose() * v) / omega;
  res.noalias() -= dinv * weights;
  return res;
}

double sandwich_logdet(const Vector& d) {
  if ((d.array() <= 0.0).any()) {
    throw std::invalid_argument("sandwich_logdet: entries of d must be positive");
  }
  return d.array().log().sum() + std::log(d.cwiseInverse().sum()) -
         std::log(static_cast<double>(d.size()));
}

OrthoComplement::OrthoComplement(Matrix reflectors, int p, int r)
    : reflectors_(std::move(reflectors)), p_(p), r_(r) {
  scale_.resize(r_);
  for (int j = 0; j < r_; ++j) {
    scale_[j] = 2.0 / reflectors_.col(j).tail(p_ - j).squaredNorm();
  }
}

Matrix OrthoComplement::apply_q_transpose(Matrix x) const {
  if (x.rows() != p_) throw std::invalid_argument("complement apply: row count mismatch");
  for (int j = 0; j < r_; ++j) {
    const auto v = reflectors_.col(j).tail(p_ - j);
    auto block = x.bottomRows(p_ - j);
    const Eigen::RowVectorXd w = scale_[j] * (v.transpose() * block);
    block.noalias() -= v * w;
  }
  return x;
}

Matrix OrthoComplement::apply_q(Matrix x) const {
  if (x.rows() != p_) throw std::invalid_argument("complement apply: row count mismatch");
  for (int j = r_ - 1; j >= 0; --j) {
    const auto v = reflectors_.col(j).tail(p_ - j);
    auto block = x.bottomRows(p_ - j);
    const Eigen::RowVectorXd w = scale_[j] * (v.transpose() * block);
    block.noalias() -= v * w;
  }
  return x;
}

Matrix OrthoComplement::apply(const Matrix& x) const {
  return apply_q_transpose(x).bottomRows(p_ - r_);
}

Matrix OrthoComplement::apply_adjoint(const Matrix& z) const {
  if (z.rows() != p_ - r_) throw std::invalid_argument("complement adjoint: row count mismatch");
  Matrix padded = Matrix::Zero(p_, z.cols());
  padded.bottomRows(p_ - r_) = z;
  return apply_q(std::move(padded));
}

ComplementBuild build_complement(const Matrix& b_centered) {
  const int p = static_cast<int>(b_centered.rows());
  const int m = static_cast<int>(b_centered.cols());
  if (p == 0 || m == 0 || b_centered.cwiseAbs().maxCoeff() == 0.0) {
    throw std::runtime_error("cannot build complement: loading matrix has rank zero");
  }

  Eigen::BDCSVD<Matrix> svd(b_centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double threshold =
      std::max(p, m) * std::numeric_limits<double>::epsilon() * s[0];
  int r = 0;
  while (r < s.size() && s[r] > threshold) ++r;
  if (r == 0) throw std::runtime_error("cannot build complement: loading matrix has rank zero");
  if (r >= p) {
    throw std::runtime_error("loading matrix spans the whole centered promoter space");
  }

  ComplementBuild out;
  out.rank = r;
  out.qc = svd.matrixU().leftCols(r);
  out.svd_s = s.head(r);
  out.svd_v = svd.matrixV().leftCols(r);

  // Reflection j maps the (already partially reflected) j-th column of Q_C
  // onto +-e_j. The sign is chosen away from the leading entry so the pivot
  // never cancels; a zero entry takes the positive branch.
  Matrix reflectors = Matrix::Zero(p, r);
  Vector scale(r);
  Vector w(p);
  for (int j = 0; j < r; ++j) {
    w = out.qc.col(j);
    for (int i = 0; i < j; ++i) {
      const auto v = reflectors.col(i).tail(p - i);
      auto seg = w.tail(p - i);
      seg -= v * (scale[i] * v.dot(seg));
    }
    const double target = (w[j] > 0.0) ? -1.0 : 1.0;
    w[j] -= target;
    w.head(j).setZero();
    reflectors.col(j).tail(p - j) = w.tail(p - j) / w[j];
    scale[j] = 2.0 / reflectors.col(j).tail(p - j).squaredNorm();
  }
  out.complement = OrthoComplement(std::move(reflectors), p, r);
  return out;
}

std::vector<int> commutation_permutation(int n, int m) {
  if (n < 1 || m < 1) throw std::invalid_argument("commutation_permutation: sizes must be >= 1");
  std::vector<int> pi(static_cast<size_t>(n) * static_cast<size_t>(m));
  for (int i = 0; i < n * m; ++i) {
    pi[static_cast<size_t>(i)] = n * (i % m) + i / m;
  }
  return pi;
}

}  // namespace motiv
