#include "motiv/simgen.hpp"

#include "motiv/rng.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace motiv {

namespace {

/// Double-centers the expression (rows and columns) and column-centers the
/// loadings: the classic preprocessing of the ridge baseline.
void center_inputs(const ExpressionDataset& dataset, const MotifLoadings& loadings, Matrix& y,
                   Matrix& b) {
  y = dataset.values;
  const Vector row_means = y.rowwise().mean();
  y.colwise() -= row_means;
  const Eigen::RowVectorXd col_means = y.colwise().mean();
  y.rowwise() -= col_means;

  b = loadings.values;
  const Eigen::RowVectorXd b_means = b.colwise().mean();
  b.rowwise() -= b_means;
}

Matrix solve_ridge(const Matrix& b, const Matrix& y, double ridge) {
  const int m = static_cast<int>(b.cols());
  Matrix gram = b.transpose() * b;
  gram.diagonal().array() += ridge;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("ridge system is not positive definite");
  }
  (void)m;
  return llt.solve(b.transpose() * y);  // m x n
}

}  // namespace

Matrix mara_baseline(const ExpressionDataset& dataset, const MotifLoadings& loadings,
                     double ridge) {
  Matrix y, b;
  center_inputs(dataset, loadings, y, b);
  return solve_ridge(b, y, ridge);
}

std::pair<Matrix, double> mara_baseline_cv(const ExpressionDataset& dataset,
                                           const MotifLoadings& loadings, int folds,
                                           uint64_t seed) {
  Matrix y, b;
  center_inputs(dataset, loadings, y, b);
  const int p = static_cast<int>(y.rows());
  folds = std::max(2, std::min(folds, p));

  std::vector<int> order(static_cast<size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(Rng::derive(seed, 0x72696467));  // "ridg"
  for (int i = p - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next() % static_cast<uint64_t>(i + 1));
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }
  std::vector<int> fold_of(static_cast<size_t>(p));
  for (int i = 0; i < p; ++i) fold_of[static_cast<size_t>(order[static_cast<size_t>(i)])] = i % folds;

  // Grid scaled by the mean diagonal of the Gram so it tracks problem size.
  const double scale = (b.transpose() * b).trace() / b.cols();
  std::vector<double> grid(17);
  for (int i = 0; i < 17; ++i) grid[static_cast<size_t>(i)] = scale * std::pow(10.0, -4.0 + 6.0 * i / 16.0);

  std::vector<double> sse(grid.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train, held;
    for (int i = 0; i < p; ++i) (fold_of[static_cast<size_t>(i)] == f ? held : train).push_back(i);
    if (train.empty() || held.empty()) continue;
    Matrix b_tr(static_cast<Eigen::Index>(train.size()), b.cols());
    Matrix y_tr(static_cast<Eigen::Index>(train.size()), y.cols());
    for (size_t t = 0; t < train.size(); ++t) {
      b_tr.row(static_cast<Eigen::Index>(t)) = b.row(train[t]);
      y_tr.row(static_cast<Eigen::Index>(t)) = y.row(train[t]);
    }
    Matrix b_h(static_cast<Eigen::Index>(held.size()), b.cols());
    Matrix y_h(static_cast<Eigen::Index>(held.size()), y.cols());
    for (size_t t = 0; t < held.size(); ++t) {
      b_h.row(static_cast<Eigen::Index>(t)) = b.row(held[t]);
      y_h.row(static_cast<Eigen::Index>(t)) = y.row(held[t]);
    }
    for (size_t gi = 0; gi < grid.size(); ++gi) {
      const Matrix u = solve_ridge(b_tr, y_tr, grid[gi]);
      sse[gi] += (y_h - b_h * u).squaredNorm();
    }
  }
  size_t best = grid.size() - 1;
  for (size_t gi = grid.size(); gi-- > 0;) {
    if (sse[gi] <= sse[best]) best = gi;  // ties toward the larger ridge
  }

  return {solve_ridge(b, y, grid[best]), grid[best]};
}

}  // namespace motiv
