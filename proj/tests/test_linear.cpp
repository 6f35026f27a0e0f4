#include <doctest.h>

#include <cmath>
#include <limits>

#include "ddml/learners.hpp"
#include "ddml/penalized.hpp"
#include "support.hpp"

using namespace ddml;
using namespace ddml::linear;

namespace {

struct Centered {
  MatrixXd x;
  VectorXd y;
};

Centered center(const MatrixXd& x, const VectorXd& y) {
  return {x.rowwise() - x.colwise().mean(), y.array() - y.mean()};
}

double lasso_objective(const Centered& c, const VectorXd& b, double lambda) {
  const double n = static_cast<double>(c.y.size());
  return (c.y - c.x * b).squaredNorm() / (2.0 * n) + lambda * b.lpNorm<1>();
}

// Exhaustive lasso: every support S and sign pattern s solves the stationarity
// system Xs'Xs b = Xs'y - n lambda s; the best sign-consistent candidate wins.
VectorXd brute_lasso(const Centered& c, double lambda) {
  const int p = static_cast<int>(c.x.cols());
  const double n = static_cast<double>(c.y.size());
  VectorXd best = VectorXd::Zero(p);
  double best_obj = lasso_objective(c, best, lambda);
  for (int mask = 1; mask < (1 << p); ++mask) {
    std::vector<int> support;
    for (int j = 0; j < p; ++j)
      if (mask & (1 << j)) support.push_back(j);
    const int s = static_cast<int>(support.size());
    MatrixXd xs(c.x.rows(), s);
    for (int k = 0; k < s; ++k) xs.col(k) = c.x.col(support[k]);
    const MatrixXd gram = xs.transpose() * xs;
    const VectorXd xty = xs.transpose() * c.y;
    for (int signs = 0; signs < (1 << s); ++signs) {
      VectorXd sg(s);
      for (int k = 0; k < s; ++k) sg[k] = (signs & (1 << k)) ? -1.0 : 1.0;
      const VectorXd bs = gram.ldlt().solve(xty - n * lambda * sg);
      bool consistent = true;
      for (int k = 0; k < s; ++k) consistent = consistent && bs[k] * sg[k] > 0.0;
      if (!consistent) continue;
      VectorXd b = VectorXd::Zero(p);
      for (int k = 0; k < s; ++k) b[support[k]] = bs[k];
      const double obj = lasso_objective(c, b, lambda);
      if (obj < best_obj) {
        best_obj = obj;
        best = b;
      }
    }
  }
  return best;
}

// max KKT violation of (1/2n)||y - Xb||^2 + lambda ||b||_1
double lasso_kkt(const Centered& c, const VectorXd& b, double lambda) {
  const double n = static_cast<double>(c.y.size());
  const VectorXd g = c.x.transpose() * (c.y - c.x * b) / n;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    const double v = b[j] == 0.0 ? std::max(0.0, std::abs(g[j]) - lambda)
                                 : std::abs(g[j] - lambda * (b[j] > 0 ? 1.0 : -1.0));
    worst = std::max(worst, v);
  }
  return worst;
}

}  // namespace

TEST_SUITE("linear") {
  TEST_CASE("OLS reproduces an exact line") {
    MatrixXd x(3, 1);
    x << 1, 2, 3;
    VectorXd y(3);
    y << 2, 4, 6;
    const auto f = ols(x, y);
    CHECK(f.coef[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(std::abs(f.intercept) < 1e-12);
    CHECK_FALSE(f.rank_deficient);
    const auto learner = fit(preset_learner("ols"), x, y);
    const VectorXd pred = learner.predict(x);
    for (int i = 0; i < 3; ++i) CHECK(pred[i] == doctest::Approx(y[i]).epsilon(1e-13));
  }

  TEST_CASE("OLS matches the normal equations") {
    const MatrixXd x = testing::normal_matrix(80, 5, 11);
    const VectorXd y = testing::normal_vector(80, 12) + x.col(2) * 3.0;
    const auto f = ols(x, y);
    MatrixXd design(80, 6);
    design.col(0).setOnes();
    design.rightCols(5) = x;
    const VectorXd beta = (design.transpose() * design).ldlt().solve(design.transpose() * y);
    CHECK(std::abs(f.intercept - beta[0]) < 1e-10);
    for (int j = 0; j < 5; ++j) CHECK(std::abs(f.coef[j] - beta[j + 1]) < 1e-10);
  }

  TEST_CASE("rank-deficient OLS returns the minimum-norm slope and flags it") {
    const VectorXd a = testing::normal_vector(30, 13);
    MatrixXd x(30, 2);
    x << a, a;
    const VectorXd y = 4.0 * a;
    const auto f = ols(x, y);
    CHECK(f.rank_deficient);
    CHECK(f.coef[0] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(f.coef[1] == doctest::Approx(2.0).epsilon(1e-10));
  }

  TEST_CASE("lasso satisfies KKT on random instances") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const MatrixXd x = testing::normal_matrix(60, 6, 100 + seed);
      VectorXd y = testing::normal_vector(60, 200 + seed);
      y += 1.5 * x.col(0) - 0.7 * x.col(3);
      const auto c = center(x, y);
      const auto g = centered_gram(x, y);
      const double lmax = lasso_lambda_max(g);
      for (double frac : {0.9, 0.3, 0.05, 0.001}) {
        VectorXd b = VectorXd::Zero(6);
        lasso_cd(g, frac * lmax, b);
        CHECK(lasso_kkt(c, b, frac * lmax) < 1e-6);
      }
    }
  }

  TEST_CASE("lasso equals the exhaustive support/sign solution") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const MatrixXd x = testing::normal_matrix(40, 4, 300 + seed);
      VectorXd y = testing::normal_vector(40, 400 + seed);
      y += 2.0 * x.col(1);
      const auto c = center(x, y);
      const double lmax = lasso_lambda_max(centered_gram(x, y));
      for (double frac : {0.5, 0.1, 0.01}) {
        const auto f = lasso(x, y, frac * lmax, {1e-12, 1000000});
        const VectorXd brute = brute_lasso(c, frac * lmax);
        CHECK((f.coef - brute).lpNorm<Eigen::Infinity>() < 1e-6);
        for (int j = 0; j < 4; ++j) CHECK((f.coef[j] == 0.0) == (brute[j] == 0.0));
      }
    }
  }

  TEST_CASE("lasso at or above lambda_max predicts the mean") {
    const MatrixXd x = testing::normal_matrix(50, 3, 21);
    const VectorXd y = testing::normal_vector(50, 22) + x.col(0);
    const double lmax = lasso_lambda_max(centered_gram(x, y));
    for (double l : {lmax, 10 * lmax, 1e12}) {
      const auto f = lasso(x, y, l);
      CHECK(f.coef.isZero(0.0));
      CHECK(f.intercept == doctest::Approx(y.mean()).epsilon(1e-14));
    }
    auto spec = preset_learner("lasso_cv");
    spec.penalty.lambda = 1e12;
    const auto learner = fit(spec, x, y);
    CHECK((learner.predict(x).array() - y.mean()).abs().maxCoeff() < 1e-12);
  }

  TEST_CASE("ridge matches its closed form") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const MatrixXd x = testing::normal_matrix(70, 5, 500 + seed);
      const VectorXd y = testing::normal_vector(70, 600 + seed) + x.col(4);
      const auto c = center(x, y);
      const double n = 70.0;
      for (double l : {1e-4, 0.1, 3.0}) {
        const auto f = ridge(x, y, l);
        // (1/2n)||y - Xb||^2 + (l/2)||b||^2  <=>  (X'X + n l I) b = X'y
        const VectorXd b = (c.x.transpose() * c.x + n * l * MatrixXd::Identity(5, 5)).ldlt().solve(c.x.transpose() * c.y);
        CHECK((f.coef - b).lpNorm<Eigen::Infinity>() < 1e-8);
        CHECK(std::abs(f.intercept - (y.mean() - x.colwise().mean().dot(b))) < 1e-8);
      }
    }
  }

  TEST_CASE("log grid endpoints and cv path shape") {
    const auto grid = log_grid(10.0, 1e-3, 5);
    REQUIRE(grid.size() == 5);
    CHECK(grid.front() == doctest::Approx(10.0));
    CHECK(grid.back() == doctest::Approx(1e-3));
    CHECK(grid[2] == doctest::Approx(0.1));
    const MatrixXd x = testing::normal_matrix(100, 3, 31);
    const VectorXd y = x.col(0) + 0.5 * testing::normal_vector(100, 32);
    const auto path = lasso_cv_path(x, y, 5, 20, 1e-4, 7);
    CHECK(path.lambdas.size() == 20);
    CHECK(path.cv_mse.size() == 20);
    for (std::size_t i = 0; i < path.best; ++i) CHECK(path.cv_mse[i] > path.cv_mse[path.best]);
    for (std::size_t i = path.best; i < 20; ++i) CHECK(path.cv_mse[i] >= path.cv_mse[path.best]);
  }

  TEST_CASE("cv lasso on a sparse truth selects the true support") {
    // beta = (1, 0, 0), n = 500, sigma = 0.1
    const MatrixXd x = testing::normal_matrix(500, 3, 41);
    const VectorXd y = x.col(0) + 0.1 * testing::normal_vector(500, 42);
    const auto learner = fit(preset_learner("lasso_cv"), x, y, 5);
    REQUIRE(learner.diagnostics().penalty);
    const double lambda = *learner.diagnostics().penalty;

    // independent check at the chosen penalty, on the standardized design
    const VectorXd mean = x.colwise().mean();
    MatrixXd z = x.rowwise() - mean.transpose();
    for (int j = 0; j < 3; ++j) z.col(j) /= std::sqrt(z.col(j).squaredNorm() / 500.0);
    const VectorXd brute = brute_lasso(center(z, y), lambda);
    CHECK(brute[0] > 0.0);
    CHECK(brute[1] == 0.0);
    CHECK(brute[2] == 0.0);

    // the learner's own coefficients, read off by probing unit directions
    MatrixXd probe = mean.transpose().replicate(4, 1);
    for (int j = 0; j < 3; ++j) probe(j + 1, j) += 1.0;
    const VectorXd pred = learner.predict(probe);
    CHECK(pred[1] - pred[0] > 0.5);
    CHECK(pred[2] - pred[0] == 0.0);
    CHECK(pred[3] - pred[0] == 0.0);
  }

  TEST_CASE("logistic regression recovers a probit-free logit") {
    const MatrixXd x = testing::normal_matrix(4000, 1, 51);
    auto rng = make_rng(52, {});
    std::uniform_real_distribution<double> u;
    VectorXd y(4000);
    for (int i = 0; i < 4000; ++i) y[i] = u(rng) < 1.0 / (1.0 + std::exp(-(0.5 + 1.2 * x(i, 0)))) ? 1.0 : 0.0;
    const auto f = logistic(x, y);
    CHECK(f.intercept == doctest::Approx(0.5).epsilon(0.25));
    CHECK(f.coef[0] == doctest::Approx(1.2).epsilon(0.15));
    // score equations hold at the optimum (up to the tiny ridge)
    VectorXd p(4000);
    for (int i = 0; i < 4000; ++i) p[i] = 1.0 / (1.0 + std::exp(-(f.intercept + f.coef[0] * x(i, 0))));
    CHECK(std::abs((y - p).sum()) < 1e-3);
  }
}
