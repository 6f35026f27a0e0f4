#include "ddml/penalized.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ddml/error.hpp"
#include "ddml/folds.hpp"

namespace ddml::linear {

namespace {

double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

MatrixXd rows_of(const MatrixXd& x, const std::vector<int>& rows) {
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

VectorXd rows_of(const VectorXd& y, const std::vector<int>& rows) {
  VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = y[rows[i]];
  return out;
}

LinearFit finish(const CenteredGram& g, VectorXd beta) {
  LinearFit fit;
  fit.intercept = g.y_mean - (g.x_mean.size() ? g.x_mean.dot(beta) : 0.0);
  fit.coef = std::move(beta);
  return fit;
}

double predict_sse(const LinearFit& fit, const MatrixXd& x, const VectorXd& y) {
  VectorXd r = y.array() - fit.intercept;
  if (x.cols() > 0) r.noalias() -= x * fit.coef;
  return r.squaredNorm();
}

}  // namespace

LinearFit ols(const MatrixXd& x, const VectorXd& y) {
  LinearFit fit;
  const double y_mean = y.mean();
  if (x.cols() == 0) {
    fit.intercept = y_mean;
    fit.coef.resize(0);
    return fit;
  }
  const VectorXd x_mean = x.colwise().mean();
  const MatrixXd xc = x.rowwise() - x_mean.transpose();
  const VectorXd yc = y.array() - y_mean;
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(xc);
  fit.coef = cod.solve(yc);
  fit.rank_deficient = cod.rank() < xc.cols();
  fit.intercept = y_mean - x_mean.dot(fit.coef);
  return fit;
}

CenteredGram centered_gram(const MatrixXd& x, const VectorXd& y) {
  CenteredGram g;
  g.n = static_cast<double>(x.rows());
  g.y_mean = y.mean();
  g.x_mean = x.colwise().mean();
  const MatrixXd xc = x.rowwise() - g.x_mean.transpose();
  const VectorXd yc = y.array() - g.y_mean;
  g.gram = MatrixXd(xc.cols(), xc.cols());
  g.gram.setZero();
  g.gram.selfadjointView<Eigen::Lower>().rankUpdate(xc.transpose(), 1.0 / g.n);
  g.gram = g.gram.selfadjointView<Eigen::Lower>();
  g.xty = xc.transpose() * yc / g.n;
  g.yy = yc.squaredNorm() / g.n;
  return g;
}

double lasso_lambda_max(const CenteredGram& g) {
  return g.xty.size() ? g.xty.cwiseAbs().maxCoeff() : 0.0;
}

int lasso_cd(const CenteredGram& g, double lambda, VectorXd& beta, const LassoOptions& opts) {
  const auto p = g.gram.cols();
  if (beta.size() != p) beta = VectorXd::Zero(p);
  VectorXd grad = g.xty - g.gram * beta;  // (Xc'yc - Xc'Xc b) / n

  auto update = [&](Eigen::Index j) {
    const double gjj = g.gram(j, j);
    if (gjj <= 1e-14) {
      if (beta[j] != 0.0) {
        grad += g.gram.col(j) * beta[j];
        beta[j] = 0.0;
      }
      return 0.0;
    }
    const double old = beta[j];
    const double next = soft_threshold(grad[j] + gjj * old, lambda) / gjj;
    const double delta = next - old;
    if (delta != 0.0) {
      beta[j] = next;
      grad.noalias() -= g.gram.col(j) * delta;
    }
    return std::abs(delta);
  };

  std::vector<Eigen::Index> active;
  int sweeps = 0;
  while (sweeps < opts.max_sweeps) {
    double change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) change = std::max(change, update(j));
    ++sweeps;
    if (change < opts.tolerance) break;
    active.clear();
    for (Eigen::Index j = 0; j < p; ++j)
      if (beta[j] != 0.0) active.push_back(j);
    while (sweeps < opts.max_sweeps) {
      double inner = 0.0;
      for (auto j : active) inner = std::max(inner, update(j));
      ++sweeps;
      if (inner < opts.tolerance) break;
    }
  }
  return sweeps;
}

std::vector<double> log_grid(double hi, double lo, int points) {
  std::vector<double> grid;
  if (points <= 1) return {hi};
  const double a = std::log(hi), b = std::log(lo);
  for (int i = 0; i < points; ++i) grid.push_back(std::exp(a + (b - a) * i / (points - 1)));
  grid.front() = hi;
  return grid;
}

LinearFit lasso(const MatrixXd& x, const VectorXd& y, double lambda, const LassoOptions& opts) {
  const auto g = centered_gram(x, y);
  VectorXd beta = VectorXd::Zero(x.cols());
  lasso_cd(g, lambda, beta, opts);
  return finish(g, std::move(beta));
}

RidgeSolver::RidgeSolver(const CenteredGram& g) : g_(&g) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(g.gram);
  vectors_ = es.eigenvectors();
  values_ = es.eigenvalues().cwiseMax(0.0);
  projected_ = vectors_.transpose() * g.xty;
}

LinearFit RidgeSolver::solve(double lambda) const {
  VectorXd scaled = projected_.array() / (values_.array() + lambda);
  return finish(*g_, vectors_ * scaled);
}

LinearFit ridge(const MatrixXd& x, const VectorXd& y, double lambda) {
  const auto g = centered_gram(x, y);
  return RidgeSolver(g).solve(lambda);
}

CvPath lasso_cv_path(const MatrixXd& x, const VectorXd& y, int folds, int grid_points, double grid_ratio,
                     std::uint64_t seed, const LassoOptions& opts) {
  const auto full = centered_gram(x, y);
  const double lmax = lasso_lambda_max(full);
  CvPath path;
  if (!(lmax > 0.0)) {
    path.lambdas = {0.0};
    path.cv_mse = {0.0};
    return path;
  }
  path.lambdas = log_grid(lmax, grid_ratio * lmax, grid_points);
  path.cv_mse.assign(path.lambdas.size(), 0.0);
  const auto split = make_folds(static_cast<std::size_t>(x.rows()), folds, seed);
  for (int v = 0; v < folds; ++v) {
    const auto train = split.complement(v);
    const auto test = split.members(v);
    const MatrixXd xt = rows_of(x, train), xv = rows_of(x, test);
    const VectorXd yt = rows_of(y, train), yv = rows_of(y, test);
    const auto g = centered_gram(xt, yt);
    VectorXd beta = VectorXd::Zero(x.cols());
    for (std::size_t l = 0; l < path.lambdas.size(); ++l) {
      lasso_cd(g, path.lambdas[l], beta, opts);
      path.cv_mse[l] += predict_sse(finish(g, beta), xv, yv);
    }
  }
  for (auto& m : path.cv_mse) m /= static_cast<double>(x.rows());
  path.best = static_cast<std::size_t>(std::min_element(path.cv_mse.begin(), path.cv_mse.end()) - path.cv_mse.begin());
  return path;
}

CvPath ridge_cv_path(const MatrixXd& x, const VectorXd& y, int folds, const std::vector<double>& grid,
                     std::uint64_t seed) {
  CvPath path;
  path.lambdas = grid;
  path.cv_mse.assign(grid.size(), 0.0);
  const auto split = make_folds(static_cast<std::size_t>(x.rows()), folds, seed);
  for (int v = 0; v < folds; ++v) {
    const auto train = split.complement(v);
    const auto test = split.members(v);
    const MatrixXd xv = rows_of(x, test);
    const VectorXd yv = rows_of(y, test);
    const auto g = centered_gram(rows_of(x, train), rows_of(y, train));
    const RidgeSolver solver(g);
    for (std::size_t l = 0; l < grid.size(); ++l) path.cv_mse[l] += predict_sse(solver.solve(grid[l]), xv, yv);
  }
  for (auto& m : path.cv_mse) m /= static_cast<double>(x.rows());
  path.best = static_cast<std::size_t>(std::min_element(path.cv_mse.begin(), path.cv_mse.end()) - path.cv_mse.begin());
  return path;
}

LinearFit logistic(const MatrixXd& x, const VectorXd& y, double ridge_penalty, int max_iter) {
  const auto n = x.rows();
  const auto p = x.cols();
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(y[i] >= 0.0 && y[i] <= 1.0)) throw ConfigError("logistic learner needs a target in [0, 1]");
  MatrixXd design(n, p + 1);
  design.col(0).setOnes();
  if (p > 0) design.rightCols(p) = x;
  VectorXd theta = VectorXd::Zero(p + 1);
  const double ybar = std::clamp(y.mean(), 1e-6, 1.0 - 1e-6);
  theta[0] = std::log(ybar / (1.0 - ybar));

  auto objective = [&](const VectorXd& t) {
    const VectorXd eta = design * t;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double e = eta[i];
      const double log1pexp = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
      ll += y[i] * e - log1pexp;
    }
    return -ll / static_cast<double>(n) + 0.5 * ridge_penalty * t.tail(p).squaredNorm();
  };

  double current = objective(theta);
  for (int it = 0; it < max_iter; ++it) {
    const VectorXd eta = design * theta;
    const VectorXd prob = (1.0 + (-eta.array()).exp()).inverse();
    const VectorXd w = (prob.array() * (1.0 - prob.array())).max(1e-12);
    VectorXd grad = design.transpose() * (y - prob) / static_cast<double>(n);
    grad.tail(p) -= ridge_penalty * theta.tail(p);
    MatrixXd hess = design.transpose() * w.asDiagonal() * design / static_cast<double>(n);
    hess.diagonal().tail(p).array() += ridge_penalty;
    hess(0, 0) += 1e-12;
    const VectorXd step = hess.ldlt().solve(grad);
    double t = 1.0;
    VectorXd next = theta + step;
    double value = objective(next);
    while (value > current + 1e-16 && t > 1e-8) {
      t *= 0.5;
      next = theta + t * step;
      value = objective(next);
    }
    const double change = (next - theta).cwiseAbs().maxCoeff();
    theta = next;
    current = value;
    if (change < 1e-10) break;
  }
  LinearFit fit;
  fit.intercept = theta[0];
  fit.coef = theta.tail(p);
  return fit;
}

}  // namespace ddml::linear
