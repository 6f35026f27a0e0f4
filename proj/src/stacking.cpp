#include "ddml/stacking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ddml/error.hpp"

namespace ddml {

std::string to_string(StackingMode mode) {
  switch (mode) {
    case StackingMode::conventional: return "conventional";
    case StackingMode::short_stacking: return "short";
    case StackingMode::pooled: return "pooled";
  }
  return "unknown";
}

std::string to_string(FinalLearner final) {
  switch (final) {
    case FinalLearner::cls: return "cls";
    case FinalLearner::ols: return "ols";
    case FinalLearner::single_best: return "single_best";
    case FinalLearner::average: return "average";
  }
  return "unknown";
}

StackingMode stacking_mode_from_string(const std::string& s) {
  if (s == "conventional" || s == "stacking") return StackingMode::conventional;
  if (s == "short" || s == "short_stacking") return StackingMode::short_stacking;
  if (s == "pooled") return StackingMode::pooled;
  throw ConfigError("unknown stacking mode '" + s + "'");
}

FinalLearner final_learner_from_string(const std::string& s) {
  for (auto f : {FinalLearner::cls, FinalLearner::ols, FinalLearner::single_best, FinalLearner::average})
    if (to_string(f) == s) return f;
  throw ConfigError("unknown final learner '" + s + "'");
}

VectorXd project_to_simplex(const VectorXd& v) {
  const auto n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0, theta = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    cumulative += u[i];
    const double t = (cumulative - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) theta = t;
  }
  VectorXd w = (v.array() - theta).max(0.0);
  const double s = w.sum();
  if (s > 0.0) w /= s;
  return w;
}

namespace {

struct Quadratic {
  MatrixXd q;  // P'P / n
  VectorXd c;  // P'y / n
  double yy = 0.0;

  Quadratic(const MatrixXd& p, const VectorXd& y) {
    const double n = static_cast<double>(p.rows());
    q = p.transpose() * p / n;
    c = p.transpose() * y / n;
    yy = y.squaredNorm() / n;
  }
  double value(const VectorXd& w) const { return w.dot(q * w) - 2.0 * c.dot(w) + yy; }
  VectorXd gradient(const VectorXd& w) const { return 2.0 * (q * w - c); }
};

double kkt_from_gradient(const VectorXd& g, const VectorXd& w) {
  double mu = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < w.size(); ++j)
    if (w[j] > 0.0) mu = std::min(mu, g[j]);
  double residual = 0.0;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (w[j] > 0.0) residual = std::max(residual, g[j] - mu);
    else residual = std::max(residual, mu - g[j]);
  }
  return residual;
}

// Equality-constrained least squares on a support: min w'Qw - 2c'w, sum w = 1.
VectorXd solve_on_support(const Quadratic& f, const std::vector<Eigen::Index>& support, Eigen::Index j_total) {
  const auto s = static_cast<Eigen::Index>(support.size());
  MatrixXd kkt = MatrixXd::Zero(s + 1, s + 1);
  VectorXd rhs(s + 1);
  for (Eigen::Index a = 0; a < s; ++a) {
    for (Eigen::Index b = 0; b < s; ++b) kkt(a, b) = 2.0 * f.q(support[a], support[b]);
    kkt(a, s) = 1.0;
    kkt(s, a) = 1.0;
    rhs[a] = 2.0 * f.c[support[a]];
  }
  rhs[s] = 1.0;
  const VectorXd sol = Eigen::CompleteOrthogonalDecomposition<MatrixXd>(kkt).solve(rhs);
  VectorXd w = VectorXd::Zero(j_total);
  for (Eigen::Index a = 0; a < s; ++a) w[support[a]] = sol[a];
  return w;
}

}  // namespace

double cls_objective(const MatrixXd& p, const VectorXd& y, const VectorXd& w) {
  return (y - p * w).squaredNorm() / static_cast<double>(p.rows());
}

double cls_kkt_residual(const MatrixXd& p, const VectorXd& y, const VectorXd& w) {
  const Quadratic f(p, y);
  return kkt_from_gradient(f.gradient(w), w);
}

ClsReport cls_solve_detailed(const MatrixXd& p, const VectorXd& y, const ClsOptions& options) {
  const auto j = p.cols();
  if (j < 1 || p.rows() < 1) throw ContractError("cls_solve needs at least one row and one column");
  if (p.rows() != y.size()) throw ShapeError("cls_solve: prediction rows do not match target length");
  ClsReport report;
  if (j == 1) {
    report.weights = VectorXd::Ones(1);
    return report;
  }
  const Quadratic f(p, y);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(f.q, Eigen::EigenvaluesOnly);
  const double lipschitz = std::max(2.0 * es.eigenvalues().maxCoeff(), 1e-300);

  VectorXd w = VectorXd::Constant(j, 1.0 / static_cast<double>(j));
  VectorXd g = f.gradient(w);
  double value = f.value(w);
  double step = 1.0 / lipschitz;
  VectorXd w_prev, g_prev;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const double pg = (w - project_to_simplex(w - g / lipschitz)).norm();
    if (pg < options.tolerance) break;
    if (it > 0) {
      const VectorXd s = w - w_prev, dg = g - g_prev;
      const double sy = s.dot(dg);
      step = sy > 0.0 ? s.squaredNorm() / sy : 1.0 / lipschitz;
      step = std::clamp(step, 1e-3 / lipschitz, 1e6 / lipschitz);
    }
    VectorXd next;
    double next_value = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      next = project_to_simplex(w - step * g);
      next_value = f.value(next);
      if (next_value <= value + 1e-4 * g.dot(next - w)) break;
      step *= 0.5;
    }
    if (!(next_value <= value)) break;
    w_prev = w;
    g_prev = g;
    w = next;
    value = next_value;
    g = f.gradient(w);
  }
  report.iterations = it;

  std::vector<Eigen::Index> support;
  for (Eigen::Index k = 0; k < j; ++k)
    if (w[k] > 0.0) support.push_back(k);
  VectorXd polished = solve_on_support(f, support, j);
  if (polished.allFinite() && polished.minCoeff() >= -1e-12) {
    polished = polished.cwiseMax(0.0);
    polished /= polished.sum();
    const double pv = f.value(polished);
    if (pv <= value + 1e-15 * (1.0 + std::abs(value)) &&
        kkt_from_gradient(f.gradient(polished), polished) <= kkt_from_gradient(g, w)) {
      w = polished;
      report.polished = true;
    }
  }
  report.weights = w;
  return report;
}

VectorXd final_learn(FinalLearner final, const MatrixXd& p, const VectorXd& y) {
  const auto j = p.cols();
  if (j < 1) throw ContractError("final learner needs at least one candidate");
  switch (final) {
    case FinalLearner::cls: return cls_solve(p, y);
    case FinalLearner::ols: return Eigen::CompleteOrthogonalDecomposition<MatrixXd>(p).solve(y);
    case FinalLearner::average: return VectorXd::Constant(j, 1.0 / static_cast<double>(j));
    case FinalLearner::single_best: {
      Eigen::Index best = 0;
      double best_loss = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < j; ++c) {
        const double loss = (y - p.col(c)).squaredNorm();
        if (loss < best_loss) {
          best_loss = loss;
          best = c;
        }
      }
      VectorXd w = VectorXd::Zero(j);
      w[best] = 1.0;
      return w;
    }
  }
  return {};
}

namespace {

std::vector<int> eligible_rows(const CrossFitMatrix& cfm) {
  std::vector<int> rows;
  for (Eigen::Index i = 0; i < cfm.preds.rows(); ++i)
    if (cfm.eligible(static_cast<int>(i))) rows.push_back(static_cast<int>(i));
  return rows;
}

void require_nested(const CrossFitMatrix& cfm, const char* mode) {
  if (!cfm.has_nested())
    throw ContractError(std::string(mode) + " stacking needs nested cross-validated predictions");
}

}  // namespace

StackingResult stack_conventional(const CrossFitMatrix& cfm, const VectorXd& target, FinalLearner final) {
  require_nested(cfm, "conventional");
  const auto j = cfm.preds.cols();
  StackingResult out;
  out.weights.mode = StackingMode::conventional;
  out.weights.final = final;
  out.weights.mspe = cfm.mspe;
  out.weights.weights.resize(cfm.folds.k, j);
  out.predictions.resize(cfm.preds.rows());
  for (int k = 0; k < cfm.folds.k; ++k) {
    const auto& nf = cfm.nested[k];
    VectorXd yk(static_cast<Eigen::Index>(nf.rows.size()));
    for (std::size_t i = 0; i < nf.rows.size(); ++i) yk[static_cast<Eigen::Index>(i)] = target[nf.rows[i]];
    const VectorXd w = final_learn(final, nf.preds, yk);
    out.weights.weights.row(k) = w.transpose();
    for (std::size_t i = 0; i < cfm.folds.n; ++i)
      if (cfm.folds.fold_of[i] == k) out.predictions[static_cast<Eigen::Index>(i)] = cfm.preds.row(static_cast<Eigen::Index>(i)).dot(w);
  }
  return out;
}

StackingResult stack_short(const CrossFitMatrix& cfm, const VectorXd& target, FinalLearner final) {
  const auto rows = eligible_rows(cfm);
  MatrixXd p(static_cast<Eigen::Index>(rows.size()), cfm.preds.cols());
  VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    p.row(static_cast<Eigen::Index>(i)) = cfm.preds.row(rows[i]);
    y[static_cast<Eigen::Index>(i)] = target[rows[i]];
  }
  StackingResult out;
  out.weights.mode = StackingMode::short_stacking;
  out.weights.final = final;
  out.weights.mspe = cfm.mspe;
  const VectorXd w = final_learn(final, p, y);
  out.weights.weights = w.transpose();
  out.predictions = cfm.preds * w;
  return out;
}

StackingResult stack_pooled(const CrossFitMatrix& cfm, const VectorXd& target, FinalLearner final) {
  require_nested(cfm, "pooled");
  Eigen::Index total = 0;
  for (const auto& nf : cfm.nested) total += static_cast<Eigen::Index>(nf.rows.size());
  MatrixXd p(total, cfm.preds.cols());
  VectorXd y(total);
  Eigen::Index at = 0;
  for (const auto& nf : cfm.nested) {
    p.middleRows(at, nf.preds.rows()) = nf.preds;
    for (std::size_t i = 0; i < nf.rows.size(); ++i) y[at + static_cast<Eigen::Index>(i)] = target[nf.rows[i]];
    at += nf.preds.rows();
  }
  StackingResult out;
  out.weights.mode = StackingMode::pooled;
  out.weights.final = final;
  out.weights.mspe = cfm.mspe;
  const VectorXd w = final_learn(final, p, y);
  out.weights.weights = w.transpose();
  out.predictions = cfm.preds * w;
  return out;
}

StackingResult stack(StackingMode mode, const CrossFitMatrix& cfm, const VectorXd& target, FinalLearner final) {
  switch (mode) {
    case StackingMode::conventional: return stack_conventional(cfm, target, final);
    case StackingMode::short_stacking: return stack_short(cfm, target, final);
    case StackingMode::pooled: return stack_pooled(cfm, target, final);
  }
  throw ContractError("unknown stacking mode");
}

}  // namespace ddml
