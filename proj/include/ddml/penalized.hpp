#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace ddml::linear {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct LinearFit {
  double intercept = 0.0;
  VectorXd coef;
  bool rank_deficient = false;
};

// Least squares with an unpenalized intercept. Rank-deficient designs get the
// minimum-norm slope vector.
LinearFit ols(const MatrixXd& x, const VectorXd& y);

// Sufficient statistics of a centered design: gram = Xc'Xc/n, xty = Xc'yc/n.
struct CenteredGram {
  VectorXd x_mean;
  double y_mean = 0.0;
  MatrixXd gram;
  VectorXd xty;
  double yy = 0.0;  // yc'yc/n
  double n = 0.0;
};

CenteredGram centered_gram(const MatrixXd& x, const VectorXd& y);

// Coordinate-descent lasso on (1/2n)||yc - Xc b||^2 + lambda ||b||_1.
// `beta` is the warm start on entry and the solution on exit.
struct LassoOptions {
  double tolerance = 1e-7;  // max absolute coefficient change per sweep
  int max_sweeps = 100000;
};
int lasso_cd(const CenteredGram& g, double lambda, VectorXd& beta, const LassoOptions& opts = {});

// Smallest lambda at which every lasso coefficient is zero.
double lasso_lambda_max(const CenteredGram& g);

// Log-spaced decreasing grid from lambda_max to ratio * lambda_max.
std::vector<double> log_grid(double hi, double lo, int points);

LinearFit lasso(const MatrixXd& x, const VectorXd& y, double lambda, const LassoOptions& opts = {});

// Ridge on (1/2n)||yc - Xc b||^2 + (lambda/2)||b||^2 via an eigendecomposition
// of the Gram matrix, evaluated for every lambda in the grid.
class RidgeSolver {
 public:
  explicit RidgeSolver(const CenteredGram& g);
  LinearFit solve(double lambda) const;

 private:
  const CenteredGram* g_;
  MatrixXd vectors_;
  VectorXd values_;
  VectorXd projected_;  // V' xty
};

LinearFit ridge(const MatrixXd& x, const VectorXd& y, double lambda);

struct CvPath {
  std::vector<double> lambdas;
  std::vector<double> cv_mse;
  std::size_t best = 0;
};

// V-fold cross-validation over a lambda grid. Fold split is drawn from `seed`.
CvPath lasso_cv_path(const MatrixXd& x, const VectorXd& y, int folds, int grid_points,
                     double grid_ratio, std::uint64_t seed, const LassoOptions& opts = {});
CvPath ridge_cv_path(const MatrixXd& x, const VectorXd& y, int folds, const std::vector<double>& grid,
                     std::uint64_t seed);

// Logistic regression with intercept fitted by Newton-Raphson. `ridge` adds a
// small quadratic penalty on the slopes so separable data still converges.
LinearFit logistic(const MatrixXd& x, const VectorXd& y, double ridge = 1e-6, int max_iter = 100);

}  // namespace ddml::linear
