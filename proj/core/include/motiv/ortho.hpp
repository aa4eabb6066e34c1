#pragma once

#include "motiv/types.hpp"

#include <vector>

namespace motiv {

/// Semi-orthogonal (k-1) x k operator whose rows span the complement of the
/// constant vector. Row j is the normalized contrast [1/j ... 1/j, -1, 0 ...].
/// Applications run in O(k * cols) via prefix/suffix sums; the matrix itself
/// is never materialized.
class HelmertOperator {
 public:
  explicit HelmertOperator(int k);

  int k() const { return k_; }
  int rows() const { return k_ - 1; }

  Matrix apply_left(const Matrix& x) const;             // H X,   (k-1) x c
  Matrix apply_left_transpose(const Matrix& z) const;   // H^T Z, k x c
  Matrix apply_right_transpose(const Matrix& x) const;  // X H^T, c x (k-1)
  Matrix apply_right(const Matrix& z) const;            // Z H,   c x k

  /// Dense row-by-row construction, intended for oracle tests at small k.
  static Matrix dense(int k);

 private:
  int k_;
};

/// Applies H_k^T (H_k diag(d) H_k^T)^{-1} H_k to each column of v in O(k)
/// per column, using the closed form D^{-1} - D^{-1} 1 1^T D^{-1} / (1^T D^{-1} 1).
/// All d_i must be positive.
Matrix sandwich_inverse_apply(const Vector& d, const Matrix& v);

/// ln det |H_k diag(d) H_k^T| = sum ln d_i + ln(sum 1/d_i) - ln k.
double sandwich_logdet(const Vector& d);

/// Implicit orthogonal complement of the column space of a p x m matrix,
/// stored as r Householder reflections (O(p r) memory). Reflection j acts on
/// rows j..p-1 and is kept with its leading element normalized to 1.
class OrthoComplement {
 public:
  OrthoComplement() = default;
  OrthoComplement(Matrix reflectors, int p, int r);

  int p() const { return p_; }
  int rank() const { return r_; }

  /// Q_N^T X: applies the reflections in order and drops the first r rows.
  Matrix apply(const Matrix& x) const;
  /// Q_N Z for Z with p - r rows: pads with r zero rows and applies the
  /// reflections in reverse.
  Matrix apply_adjoint(const Matrix& z) const;
  /// Full Q^T X (in place application of all reflections).
  Matrix apply_q_transpose(Matrix x) const;
  /// Full Q X.
  Matrix apply_q(Matrix x) const;

 private:
  Matrix reflectors_;  // p x r, column j zero above row j, unit at row j
  Vector scale_;       // 2 / (v_j^T v_j)
  int p_ = 0;
  int r_ = 0;
};

/// Reduced SVD split of a centered loading matrix plus the implicit
/// complement of its column space.
struct ComplementBuild {
  OrthoComplement complement;
  Matrix qc;      // p x r, orthonormal basis of col(B)
  Vector svd_s;   // r singular values
  Matrix svd_v;   // m x r right singular vectors
  int rank = 0;
};

/// Computes the reduced SVD of B (numerical rank threshold
/// max(p, m) * eps * s_max) and the Householder reflections mapping the
/// columns of Q_C onto the first r standard basis directions.
/// Throws when B is all-zero.
ComplementBuild build_complement(const Matrix& b_centered);

/// 0-based permutation pi(i) = n * (i % m) + floor(i / m) of length n*m.
/// Conjugating a diagonal matrix by the (n, m) commutation matrix permutes
/// its diagonal by pi.
std::vector<int> commutation_permutation(int n, int m);

}  // namespace motiv
