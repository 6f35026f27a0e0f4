#include "ddml/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "ddml/error.hpp"

namespace ddml {

std::string to_string(Aggregation how) { return how == Aggregation::median ? "median" : "mean"; }

Aggregation aggregation_from_string(const std::string& s) {
  if (s == "median") return Aggregation::median;
  if (s == "mean") return Aggregation::mean;
  throw ConfigError("unknown aggregation '" + s + "'");
}

double median(std::vector<double> values) {
  if (values.empty()) throw ContractError("median of an empty set");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

void fill_ci(PointEstimate& est) {
  est.ci_low = est.theta - kNormalQuantile975 * est.se;
  est.ci_high = est.theta + kNormalQuantile975 * est.se;
}

void check_lengths(const VectorXd& y, Eigen::Index d_rows, const VectorXd& ell, Eigen::Index m_rows) {
  if (d_rows != y.size() || ell.size() != y.size() || m_rows != y.size())
    throw ShapeError("plm_estimate: inputs differ in length");
}

}  // namespace

PointEstimate plm_estimate_scalar(const VectorXd& y, const VectorXd& d, const VectorXd& ell_hat, const VectorXd& m_hat) {
  check_lengths(y, d.size(), ell_hat, m_hat.size());
  const auto n = y.size();
  double a = 0.0, b = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double dr = d[i] - m_hat[i];
    a += dr * dr;
    b += dr * (y[i] - ell_hat[i]);
  }
  if (!(a > 0.0))
    throw NumericalError("degenerate denominator: treatment residuals D - m_hat are identically zero");
  const double inv = 1.0 / a;
  const double theta = inv * b;
  double meat = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double dr = d[i] - m_hat[i];
    const double u = (y[i] - ell_hat[i]) - dr * theta;
    meat += u * u * dr * dr;
  }
  PointEstimate est;
  est.theta = VectorXd::Constant(1, theta);
  est.se = VectorXd::Constant(1, std::sqrt(inv * meat * inv));
  est.n = static_cast<std::size_t>(n);
  est.method.estimator = "plm";
  fill_ci(est);
  return est;
}

PointEstimate plm_estimate_vector(const VectorXd& y, const MatrixXd& d, const VectorXd& ell_hat, const MatrixXd& m_hat) {
  check_lengths(y, d.rows(), ell_hat, m_hat.rows());
  if (d.cols() != m_hat.cols()) throw ShapeError("plm_estimate: treatment and m_hat column counts differ");
  const auto n = y.size();
  const auto q = d.cols();
  MatrixXd a = MatrixXd::Zero(q, q);
  VectorXd b = VectorXd::Zero(q);
  VectorXd dr(q);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < q; ++c) dr[c] = d(i, c) - m_hat(i, c);
    const double yr = y[i] - ell_hat[i];
    for (Eigen::Index r = 0; r < q; ++r) {
      for (Eigen::Index c = 0; c < q; ++c) a(r, c) += dr[r] * dr[c];
      b[r] += dr[r] * yr;
    }
  }
  if (q == 1 && !(a(0, 0) > 0.0))
    throw NumericalError("degenerate denominator: treatment residuals D - m_hat are identically zero");
  Eigen::FullPivLU<MatrixXd> lu(a);
  if (lu.rank() < q) throw NumericalError("treatment residual matrix is rank deficient");
  const MatrixXd inv = lu.inverse();
  const VectorXd theta = inv * b;
  MatrixXd meat = MatrixXd::Zero(q, q);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < q; ++c) dr[c] = d(i, c) - m_hat(i, c);
    const double u = (y[i] - ell_hat[i]) - dr.dot(theta);
    for (Eigen::Index r = 0; r < q; ++r)
      for (Eigen::Index c = 0; c < q; ++c) meat(r, c) += u * u * dr[r] * dr[c];
  }
  const MatrixXd cov = inv * meat * inv;
  PointEstimate est;
  est.theta = theta;
  est.se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  est.n = static_cast<std::size_t>(n);
  est.method.estimator = "plm";
  fill_ci(est);
  return est;
}

PointEstimate plm_estimate(const VectorXd& y, const MatrixXd& d, const VectorXd& ell_hat, const MatrixXd& m_hat) {
  if (d.cols() == 1 && m_hat.cols() == 1) return plm_estimate_scalar(y, d.col(0), ell_hat, m_hat.col(0));
  return plm_estimate_vector(y, d, ell_hat, m_hat);
}

VectorXd fold_treated_share(const VectorXd& d, const FoldAssignment& folds) {
  if (static_cast<std::size_t>(d.size()) != folds.n) throw ShapeError("treatment length does not match folds");
  std::vector<double> treated(static_cast<std::size_t>(folds.k), 0.0), count(static_cast<std::size_t>(folds.k), 0.0);
  double all_treated = 0.0;
  for (std::size_t i = 0; i < folds.n; ++i) {
    treated[folds.fold_of[i]] += d[static_cast<Eigen::Index>(i)];
    count[folds.fold_of[i]] += 1.0;
    all_treated += d[static_cast<Eigen::Index>(i)];
  }
  std::vector<double> share(static_cast<std::size_t>(folds.k));
  for (int k = 0; k < folds.k; ++k) {
    const double t = all_treated - treated[k];
    const double m = static_cast<double>(folds.n) - count[k];
    if (t <= 0.0 || t >= m)
      throw DataError("training set of fold " + std::to_string(k + 1) +
                      " lacks treated or control rows; use stratified folds");
    share[k] = t / m;
  }
  VectorXd p(d.size());
  for (std::size_t i = 0; i < folds.n; ++i) p[static_cast<Eigen::Index>(i)] = share[folds.fold_of[i]];
  return p;
}

AtetEstimate atet_estimate(const VectorXd& y, const VectorXd& d, const VectorXd& g0_hat, const VectorXd& m_hat,
                           const VectorXd& p_hat, double clip) {
  const auto n = y.size();
  if (d.size() != n || g0_hat.size() != n || m_hat.size() != n || p_hat.size() != n)
    throw ShapeError("atet_estimate: inputs differ in length");
  if (n < 2) throw DataError("atet_estimate needs at least 2 rows");
  AtetEstimate out;
  out.summands.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d[i] != 0.0 && d[i] != 1.0) throw ConfigError("treatment not binary");
    double m = m_hat[i];
    if (m < clip || m > 1.0 - clip) {
      m = std::clamp(m, clip, 1.0 - clip);
      ++out.clipped;
    }
    const double p = p_hat[i];
    if (!(p > 0.0 && p < 1.0)) throw NumericalError("treated share must lie in (0, 1)");
    const double r = y[i] - g0_hat[i];
    out.summands[i] = d[i] * r / p - m * (1.0 - d[i]) * r / (p * (1.0 - m));
  }
  const double theta = out.summands.mean();
  const double var = (out.summands.array() - theta).square().sum() / static_cast<double>(n - 1);
  auto& est = out.estimate;
  est.theta = VectorXd::Constant(1, theta);
  est.se = VectorXd::Constant(1, std::sqrt(var / static_cast<double>(n)));
  est.n = static_cast<std::size_t>(n);
  est.method.estimator = "atet";
  fill_ci(est);
  return out;
}

PointEstimate aggregate_repetitions(const std::vector<PointEstimate>& estimates, Aggregation how) {
  if (estimates.empty()) throw ContractError("aggregation needs at least one repetition");
  const auto q = estimates.front().theta.size();
  for (const auto& e : estimates)
    if (e.theta.size() != q || e.se.size() != q) throw ShapeError("repetitions differ in treatment count");
  if (estimates.size() == 1) return estimates.front();

  PointEstimate agg;
  agg.theta.resize(q);
  agg.se.resize(q);
  agg.n = estimates.front().n;
  agg.method = estimates.front().method;
  agg.method.repetitions = static_cast<int>(estimates.size());
  for (Eigen::Index c = 0; c < q; ++c) {
    std::vector<double> thetas;
    for (const auto& e : estimates) thetas.push_back(e.theta[c]);
    double center = 0.0;
    if (how == Aggregation::median) {
      center = median(thetas);
    } else {
      for (double t : thetas) center += t;
      center /= static_cast<double>(thetas.size());
    }
    std::vector<double> spread;
    for (const auto& e : estimates) {
      const double dev = e.theta[c] - center;
      spread.push_back(std::sqrt(e.se[c] * e.se[c] + dev * dev));
    }
    double se = 0.0;
    if (how == Aggregation::median) {
      se = median(spread);
    } else {
      for (double s : spread) se += s;
      se /= static_cast<double>(spread.size());
    }
    agg.theta[c] = center;
    agg.se[c] = se;
  }
  fill_ci(agg);
  return agg;
}

}  // namespace ddml
