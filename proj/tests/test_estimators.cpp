#include <doctest.h>

#include <cmath>

#include "ddml/error.hpp"
#include "ddml/estimators.hpp"
#include "support.hpp"

using namespace ddml;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(v.size());
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

PointEstimate point(double theta, double se) {
  PointEstimate p;
  p.theta = VectorXd::Constant(1, theta);
  p.se = VectorXd::Constant(1, se);
  p.n = 10;
  return p;
}

}  // namespace

TEST_SUITE("estimators") {
  TEST_CASE("residual-on-residual arithmetic") {
    // y - ell = (1,2), d - m = (1,1)
    const auto est = plm_estimate_scalar(vec({1, 2}), vec({1, 1}), vec({0, 0}), vec({0, 0}));
    CHECK(est.theta[0] == 1.5);
    // u = (-0.5, 0.5): HC0 = (0.25 + 0.25) / 2^2
    CHECK(est.se[0] == doctest::Approx(std::sqrt(0.125)));
    CHECK(est.ci_low[0] < est.ci_high[0]);
    CHECK(est.ci_high[0] - est.theta[0] == doctest::Approx(1.959964 * est.se[0]));
  }

  TEST_CASE("degenerate denominator names the cause") {
    const VectorXd d = vec({0, 1, 0, 1});
    try {
      plm_estimate_scalar(vec({1, 2, 3, 4}), d, VectorXd::Zero(4), d);
      FAIL("expected an error");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("degenerate denominator") != std::string::npos);
    }
    CHECK_THROWS_AS(plm_estimate(vec({1, 2, 3, 4}), d, VectorXd::Zero(4), d), NumericalError);
    CHECK_THROWS_AS(plm_estimate_scalar(vec({1, 2}), vec({1, 1, 1}), vec({0, 0}), vec({0, 0})), ShapeError);
  }

  TEST_CASE("scalar and matrix paths agree for one treatment") {
    const VectorXd y = testing::normal_vector(200, 1), d = testing::normal_vector(200, 2);
    const VectorXd l = 0.3 * testing::normal_vector(200, 3), m = 0.2 * testing::normal_vector(200, 4);
    const auto a = plm_estimate_scalar(y, d, l, m);
    const auto b = plm_estimate_vector(y, d, l, m);
    CHECK(a.theta[0] == doctest::Approx(b.theta[0]).epsilon(1e-14));
    CHECK(a.se[0] == doctest::Approx(b.se[0]).epsilon(1e-12));
  }

  TEST_CASE("matrix path against explicit normal equations and sandwich") {
    const int n = 150;
    const MatrixXd d = testing::normal_matrix(n, 3, 10);
    const MatrixXd m = 0.1 * testing::normal_matrix(n, 3, 11);
    const VectorXd y = d * vec({1, -2, 0.5}) + testing::normal_vector(n, 12);
    const VectorXd l = VectorXd::Zero(n);
    const auto est = plm_estimate(y, d, l, m);
    const MatrixXd dr = d - m;
    const MatrixXd inv = (dr.transpose() * dr).inverse();
    const VectorXd theta = inv * dr.transpose() * y;
    MatrixXd meat = MatrixXd::Zero(3, 3);
    for (int i = 0; i < n; ++i) {
      const double u = y[i] - dr.row(i).dot(theta);
      meat += u * u * dr.row(i).transpose() * dr.row(i);
    }
    const MatrixXd cov = inv * meat * inv;
    for (int c = 0; c < 3; ++c) {
      CHECK(est.theta[c] == doctest::Approx(theta[c]).epsilon(1e-10));
      CHECK(est.se[c] == doctest::Approx(std::sqrt(cov(c, c))).epsilon(1e-10));
    }
    MatrixXd collinear = d;
    collinear.col(2) = collinear.col(0);
    CHECK_THROWS_AS(plm_estimate(y, collinear, l, MatrixXd::Zero(n, 3)), NumericalError);
  }

  TEST_CASE("affine equivariance") {
    const VectorXd y = testing::normal_vector(100, 20), d = testing::normal_vector(100, 21);
    const VectorXd l = 0.5 * testing::normal_vector(100, 22), m = 0.5 * testing::normal_vector(100, 23);
    const auto a = plm_estimate(y, d, l, m);
    const double s = 4.0, c = -7.0;
    const VectorXd y2 = (s * y).array() + c, l2 = (s * l).array() + c;
    const auto b = plm_estimate(y2, d, l2, m);
    CHECK(b.theta[0] == doctest::Approx(s * a.theta[0]).epsilon(1e-12));
    CHECK(b.se[0] == doctest::Approx(s * a.se[0]).epsilon(1e-12));
  }

  TEST_CASE("hand-evaluated ATET score") {
    const auto r = atet_estimate(vec({3, 5, 1, 1}), vec({1, 1, 0, 0}), VectorXd::Constant(4, 1.0),
                                 VectorXd::Constant(4, 0.5), VectorXd::Constant(4, 0.5));
    CHECK(r.summands == vec({4, 8, 0, 0}));
    CHECK(r.estimate.theta[0] == 3.0);
    // sample sd of (4,8,0,0) / 2
    CHECK(r.estimate.se[0] == doctest::Approx(std::sqrt(44.0 / 3.0) / 2.0));
    CHECK(r.clipped == 0);
  }

  TEST_CASE("ATET is zero when the control model fits every outcome") {
    const VectorXd y = testing::normal_vector(40, 30);
    VectorXd d(40);
    for (int i = 0; i < 40; ++i) d[i] = i % 3 == 0;
    const auto r = atet_estimate(y, d, y, VectorXd::Constant(40, 0.3), VectorXd::Constant(40, 0.35));
    CHECK(r.estimate.theta[0] == 0.0);
  }

  TEST_CASE("ATET summands average to the estimate; clipping is counted") {
    const int n = 60;
    const VectorXd y = testing::normal_vector(n, 31), g = 0.2 * testing::normal_vector(n, 32);
    VectorXd d(n), m(n), p(n);
    for (int i = 0; i < n; ++i) {
      d[i] = i % 2;
      m[i] = i == 0 ? 1.0 : (i == 2 ? -0.1 : 0.2 + 0.01 * i / 2.0);
      p[i] = 0.5;
    }
    const auto r = atet_estimate(y, d, g, m, p);
    CHECK(r.summands.mean() == doctest::Approx(r.estimate.theta[0]).epsilon(1e-14));
    CHECK(r.clipped == 2);
    CHECK(std::isfinite(r.estimate.theta[0]));
    VectorXd bad = d;
    bad[3] = 0.5;
    CHECK_THROWS_AS(atet_estimate(y, bad, g, m, p), ConfigError);
  }

  TEST_CASE("treated share per training set") {
    FoldAssignment f;
    f.n = 6;
    f.k = 2;
    f.fold_of = {0, 0, 0, 1, 1, 1};
    const VectorXd d = vec({1, 0, 0, 1, 1, 0});
    const VectorXd p = fold_treated_share(d, f);
    CHECK(p == vec({2.0 / 3, 2.0 / 3, 2.0 / 3, 1.0 / 3, 1.0 / 3, 1.0 / 3}));
    try {
      fold_treated_share(vec({1, 1, 1, 0, 0, 0}), f);
      FAIL("expected an error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("stratified") != std::string::npos);
    }
  }

  TEST_CASE("aggregation") {
    const auto one = point(1.25, 0.5);
    const auto agg1 = aggregate_repetitions({one}, Aggregation::median);
    CHECK(agg1.theta == one.theta);
    CHECK(agg1.se == one.se);

    const auto agg = aggregate_repetitions({point(1, 1), point(2, 1), point(10, 1)}, Aggregation::median);
    CHECK(agg.theta[0] == 2.0);
    // spreads sqrt(2), 1, sqrt(65) -> median sqrt(2)
    CHECK(agg.se[0] == doctest::Approx(std::sqrt(2.0)));
    CHECK(agg.method.repetitions == 3);

    const auto same = aggregate_repetitions({point(3, 0.7), point(3, 0.7), point(3, 0.7)}, Aggregation::median);
    CHECK(same.se[0] == doctest::Approx(0.7).epsilon(1e-15));

    const auto mean = aggregate_repetitions({point(1, 1), point(2, 1), point(6, 1)}, Aggregation::mean);
    CHECK(mean.theta[0] == 3.0);
    CHECK(mean.se[0] == doctest::Approx((std::sqrt(5.0) + std::sqrt(2.0) + std::sqrt(10.0)) / 3.0));

    for (int t = 0; t < 50; ++t) {
      std::vector<PointEstimate> reps;
      const VectorXd th = testing::normal_vector(5, 100 + t), se = testing::normal_vector(5, 200 + t).cwiseAbs();
      double lo = 1e9;
      for (int r = 0; r < 5; ++r) {
        reps.push_back(point(th[r], se[r]));
        lo = std::min(lo, se[r]);
      }
      CHECK(aggregate_repetitions(reps, Aggregation::median).se[0] >= lo);
    }
    CHECK(median({4, 1, 3, 2}) == 2.5);
    CHECK(aggregation_from_string("mean") == Aggregation::mean);
    CHECK_THROWS_AS(aggregation_from_string("mode"), ConfigError);
  }
}
