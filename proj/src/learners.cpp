#include "ddml/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <omp.h>

#include "ddml/error.hpp"
#include "ddml/penalized.hpp"
#include "ddml/rng.hpp"
#include "ddml/tree.hpp"

namespace ddml {

std::string to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::ols: return "ols";
    case LearnerKind::ridge_cv: return "ridge_cv";
    case LearnerKind::lasso_cv: return "lasso_cv";
    case LearnerKind::random_forest: return "random_forest";
    case LearnerKind::gradient_boosting: return "gradient_boosting";
    case LearnerKind::logistic: return "logistic";
    case LearnerKind::oracle: return "oracle";
  }
  return "unknown";
}

LearnerKind learner_kind_from_string(const std::string& name) {
  for (auto k : {LearnerKind::ols, LearnerKind::ridge_cv, LearnerKind::lasso_cv, LearnerKind::random_forest,
                 LearnerKind::gradient_boosting, LearnerKind::logistic, LearnerKind::oracle})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown learner kind '" + name + "'");
}

std::string to_string(Target t) {
  switch (t) {
    case Target::ell: return "ell";
    case Target::m: return "m";
    case Target::g0: return "g0";
    case Target::g1: return "g1";
  }
  return "unknown";
}

LearnerSpec preset_learner(const std::string& preset) {
  LearnerSpec s;
  s.name = preset;
  if (preset == "ols") {
    s.kind = LearnerKind::ols;
  } else if (preset == "rf_low") {
    s.kind = LearnerKind::random_forest;
    s.forest.max_features = 8;
    s.forest.min_node_size = 1;
    s.forest.subsample_fraction = 0.7;
  } else if (preset == "rf_high") {
    s.kind = LearnerKind::random_forest;
    s.forest.max_features = 5;
    s.forest.min_node_size = 10;
    s.forest.subsample_fraction = 0.7;
  } else if (preset == "gbt_low") {
    s.kind = LearnerKind::gradient_boosting;
    s.boosting.n_trees = 500;
    s.boosting.max_depth = 3;
    s.boosting.learning_rate = 0.01;
  } else if (preset == "gbt_high") {
    s.kind = LearnerKind::gradient_boosting;
    s.boosting.n_trees = 250;
    s.boosting.max_depth = 3;
    s.boosting.learning_rate = 0.01;
  } else if (preset == "lasso_poly2") {
    s.kind = LearnerKind::lasso_cv;
    s.transform = {TransformStep::poly2_interactions()};
  } else if (preset == "ridge_poly2") {
    s.kind = LearnerKind::ridge_cv;
    s.transform = {TransformStep::poly2_interactions()};
  } else if (preset == "lasso_poly10") {
    s.kind = LearnerKind::lasso_cv;
    s.transform = {TransformStep::polynomial(10)};
  } else if (preset == "ridge_poly10") {
    s.kind = LearnerKind::ridge_cv;
    s.transform = {TransformStep::polynomial(10)};
  } else if (preset == "lasso_cv" || preset == "ridge_cv" || preset == "logistic") {
    s.kind = learner_kind_from_string(preset);
  } else {
    throw ConfigError("unknown learner preset '" + preset + "'");
  }
  return s;
}

namespace {

class ConstantModel final : public Model {
 public:
  explicit ConstantModel(double v) : value_(v) {}
  VectorXd predict(const MatrixXd& z, const MatrixXd&) const override { return VectorXd::Constant(z.rows(), value_); }

 private:
  double value_;
};

class LinearModel final : public Model {
 public:
  explicit LinearModel(linear::LinearFit f) : fit_(std::move(f)) {}
  VectorXd predict(const MatrixXd& z, const MatrixXd&) const override {
    VectorXd out = VectorXd::Constant(z.rows(), fit_.intercept);
    if (z.cols() > 0) out.noalias() += z * fit_.coef;
    return out;
  }

 private:
  linear::LinearFit fit_;
};

class LogisticModel final : public Model {
 public:
  explicit LogisticModel(linear::LinearFit f) : fit_(std::move(f)) {}
  VectorXd predict(const MatrixXd& z, const MatrixXd&) const override {
    VectorXd eta = VectorXd::Constant(z.rows(), fit_.intercept);
    if (z.cols() > 0) eta.noalias() += z * fit_.coef;
    VectorXd out(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i)
      out[i] = std::clamp(1.0 / (1.0 + std::exp(-eta[i])), kProbabilityClip, 1.0 - kProbabilityClip);
    return out;
  }

 private:
  linear::LinearFit fit_;
};

class ForestModel final : public Model {
 public:
  explicit ForestModel(std::vector<tree::RegressionTree> trees) : trees_(std::move(trees)) {}
  VectorXd predict(const MatrixXd& z, const MatrixXd&) const override {
    VectorXd out = VectorXd::Zero(z.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      double s = 0.0;
      for (const auto& t : trees_) s += t.predict_row(z, i);
      out[i] = s / static_cast<double>(trees_.size());
    }
    return out;
  }

 private:
  std::vector<tree::RegressionTree> trees_;
};

class BoostingModel final : public Model {
 public:
  BoostingModel(double init, double rate, std::vector<tree::RegressionTree> trees)
      : init_(init), rate_(rate), trees_(std::move(trees)) {}
  VectorXd predict(const MatrixXd& z, const MatrixXd&) const override {
    VectorXd out = VectorXd::Constant(z.rows(), init_);
    for (const auto& t : trees_)
      for (Eigen::Index i = 0; i < z.rows(); ++i) out[i] += rate_ * t.predict_row(z, i);
    return out;
  }

 private:
  double init_;
  double rate_;
  std::vector<tree::RegressionTree> trees_;
};

class OracleModel final : public Model {
 public:
  explicit OracleModel(Cef truth) : truth_(std::move(truth)) {}
  VectorXd predict(const MatrixXd&, const MatrixXd& raw) const override {
    VectorXd out(raw.rows());
    std::vector<double> row(static_cast<std::size_t>(raw.cols()));
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
      for (Eigen::Index c = 0; c < raw.cols(); ++c) row[c] = raw(i, c);
      out[i] = truth_(row);
    }
    return out;
  }

 private:
  Cef truth_;
};

std::shared_ptr<const Model> fit_forest(const ForestParams& fp, const MatrixXd& z, const VectorXd& y,
                                        std::uint64_t seed, FitDiagnostics& diag) {
  if (fp.n_trees < 1) throw ConfigError("random_forest needs n_trees >= 1");
  if (!(fp.subsample_fraction > 0.0 && fp.subsample_fraction <= 1.0))
    throw ConfigError("random_forest subsample_fraction must lie in (0, 1]");
  const int n = static_cast<int>(z.rows());
  const int p = static_cast<int>(z.cols());
  tree::TreeParams tp;
  tp.max_depth = fp.max_depth;
  tp.min_leaf = std::max(1, fp.min_node_size);
  tp.max_features = fp.max_features > 0 ? std::min(fp.max_features, p) : std::max(1, (p + 2) / 3);
  const int draw = std::max(1, static_cast<int>(std::lround(fp.subsample_fraction * n)));
  const auto sorted = tree::presort(z);
  std::vector<tree::RegressionTree> trees(static_cast<std::size_t>(fp.n_trees));

#pragma omp parallel if (!omp_in_parallel())
  {
    tree::TreeBuilder builder(z, sorted);
    std::vector<int> counts(static_cast<std::size_t>(n));
    std::vector<int> perm(static_cast<std::size_t>(n));
#pragma omp for schedule(static)
    for (int t = 0; t < fp.n_trees; ++t) {
      Rng rng = make_rng(seed, {static_cast<std::uint64_t>(t)});
      std::fill(counts.begin(), counts.end(), 0);
      if (fp.bootstrap) {
        std::uniform_int_distribution<int> pick(0, n - 1);
        for (int i = 0; i < draw; ++i) ++counts[pick(rng)];
      } else if (draw == n) {
        std::fill(counts.begin(), counts.end(), 1);
      } else {
        std::iota(perm.begin(), perm.end(), 0);
        for (int i = 0; i < draw; ++i) {
          std::uniform_int_distribution<int> pick(i, n - 1);
          std::swap(perm[i], perm[pick(rng)]);
          counts[perm[i]] = 1;
        }
      }
      trees[t] = builder.build(y, counts, tp, rng);
    }
  }
  diag.trees_used = fp.n_trees;
  return std::make_shared<ForestModel>(std::move(trees));
}

std::shared_ptr<const Model> fit_boosting(const BoostingParams& bp, const MatrixXd& z, const VectorXd& y,
                                          std::uint64_t seed, FitDiagnostics& diag) {
  if (bp.n_trees < 0) throw ConfigError("gradient_boosting needs n_trees >= 0");
  if (bp.learning_rate < 0.0) throw ConfigError("gradient_boosting learning_rate must be >= 0");
  const int n = static_cast<int>(z.rows());
  tree::TreeParams tp;
  tp.max_depth = bp.max_depth;
  tp.min_leaf = std::max(1, bp.min_node_size);

  std::vector<int> train_counts(static_cast<std::size_t>(n), 1);
  std::vector<int> valid;
  if (bp.early_stopping_rounds > 0) {
    if (!(bp.validation_fraction > 0.0 && bp.validation_fraction < 1.0))
      throw ConfigError("gradient_boosting validation_fraction must lie in (0, 1)");
    Rng rng = make_rng(seed, {0xe5});
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const int nv = std::clamp(static_cast<int>(std::lround(bp.validation_fraction * n)), 1, n - 1);
    valid.assign(perm.begin(), perm.begin() + nv);
    std::sort(valid.begin(), valid.end());
    for (int r : valid) train_counts[r] = 0;
  }

  double init = 0.0;
  int n_train = 0;
  for (int i = 0; i < n; ++i)
    if (train_counts[i]) {
      init += y[i];
      ++n_train;
    }
  init /= n_train;

  std::vector<tree::RegressionTree> trees;
  if (bp.learning_rate > 0.0 && bp.n_trees > 0) {
    const auto sorted = tree::presort(z);
    tree::TreeBuilder builder(z, sorted);
    Rng rng = make_rng(seed, {0xb0});
    VectorXd pred = VectorXd::Constant(n, init);
    VectorXd residual(n);
    double best_valid = std::numeric_limits<double>::infinity();
    std::size_t best_count = 0;
    int since_best = 0;
    for (int t = 0; t < bp.n_trees; ++t) {
      residual = y - pred;
      trees.push_back(builder.build(residual, train_counts, tp, rng));
      for (Eigen::Index i = 0; i < n; ++i) pred[i] += bp.learning_rate * trees.back().predict_row(z, i);
      if (!valid.empty()) {
        double mse = 0.0;
        for (int r : valid) mse += (y[r] - pred[r]) * (y[r] - pred[r]);
        if (mse < best_valid) {
          best_valid = mse;
          best_count = trees.size();
          since_best = 0;
        } else if (++since_best >= bp.early_stopping_rounds) {
          break;
        }
      }
    }
    if (!valid.empty()) trees.resize(best_count);
  }
  diag.trees_used = static_cast<int>(trees.size());
  return std::make_shared<BoostingModel>(init, bp.learning_rate, std::move(trees));
}

}  // namespace

FittedLearner::FittedLearner(LearnerSpec spec, TransformPlan plan, std::shared_ptr<const Model> model,
                             std::size_t input_columns, FitDiagnostics diag)
    : spec_(std::move(spec)), plan_(std::move(plan)), model_(std::move(model)), inputs_(input_columns), diag_(diag) {}

VectorXd FittedLearner::predict(const MatrixXd& x) const {
  if (spec_.kind != LearnerKind::oracle && static_cast<std::size_t>(x.cols()) != inputs_)
    throw ShapeError("learner '" + spec_.display_name() + "' expects " + std::to_string(inputs_) +
                     " columns, got " + std::to_string(x.cols()));
  if (plan_.empty()) return model_->predict(x, x);
  return model_->predict(plan_.apply(x), x);
}

FittedLearner fit(const LearnerSpec& spec, const MatrixXd& x, const VectorXd& y, std::uint64_t seed) {
  if (x.rows() != y.size())
    throw ShapeError("learner '" + spec.display_name() + "': x has " + std::to_string(x.rows()) + " rows but y has " +
                     std::to_string(y.size()));
  if (y.size() < 2) throw DataError("learner '" + spec.display_name() + "' needs at least 2 training rows");
  if (!y.allFinite() || !x.allFinite()) throw DataError("learner '" + spec.display_name() + "': non-finite training data");
  const auto inputs = static_cast<std::size_t>(x.cols());
  FitDiagnostics diag;

  if (spec.kind == LearnerKind::oracle) {
    if (!spec.truth) throw ConfigError("oracle learner '" + spec.display_name() + "' has no truth function");
    return FittedLearner(spec, {}, std::make_shared<OracleModel>(spec.truth), inputs, diag);
  }
  if (y.maxCoeff() == y.minCoeff()) {
    diag.constant_target = true;
    return FittedLearner(spec, {}, std::make_shared<ConstantModel>(y[0]), inputs, diag);
  }

  TransformSpec steps = spec.transform;
  const bool penalized = spec.kind == LearnerKind::lasso_cv || spec.kind == LearnerKind::ridge_cv;
  if (penalized && (steps.empty() || steps.back().kind != StepKind::standardize))
    steps.push_back(TransformStep::standardize());
  TransformPlan plan = fit_transform(steps, x);
  const MatrixXd z = plan.empty() ? x : plan.apply(x);
  diag.constant_columns = plan.has_constant_columns();
  const std::uint64_t stream = derive_seed(seed, {spec.seed_stream});

  std::shared_ptr<const Model> model;
  switch (spec.kind) {
    case LearnerKind::ols: {
      auto f = linear::ols(z, y);
      diag.rank_deficient = f.rank_deficient;
      model = std::make_shared<LinearModel>(std::move(f));
      break;
    }
    case LearnerKind::lasso_cv: {
      linear::LassoOptions opts;
      opts.tolerance = spec.penalty.tolerance;
      double lambda = 0.0;
      if (spec.penalty.lambda) {
        lambda = *spec.penalty.lambda;
      } else {
        if (z.rows() < spec.penalty.cv_folds)
          throw DataError("lasso_cv needs at least " + std::to_string(spec.penalty.cv_folds) + " rows");
        const auto path = linear::lasso_cv_path(z, y, spec.penalty.cv_folds, spec.penalty.grid_points,
                                                spec.penalty.grid_ratio, stream, opts);
        lambda = path.lambdas[path.best];
      }
      diag.penalty = lambda;
      model = std::make_shared<LinearModel>(linear::lasso(z, y, lambda, opts));
      break;
    }
    case LearnerKind::ridge_cv: {
      double lambda = 0.0;
      if (spec.penalty.lambda) {
        lambda = *spec.penalty.lambda;
      } else {
        if (z.rows() < spec.penalty.cv_folds)
          throw DataError("ridge_cv needs at least " + std::to_string(spec.penalty.cv_folds) + " rows");
        const auto grid = linear::log_grid(1e3, 1e-6, spec.penalty.grid_points);
        const auto path = linear::ridge_cv_path(z, y, spec.penalty.cv_folds, grid, stream);
        lambda = path.lambdas[path.best];
      }
      diag.penalty = lambda;
      model = std::make_shared<LinearModel>(linear::ridge(z, y, lambda));
      break;
    }
    case LearnerKind::logistic:
      model = std::make_shared<LogisticModel>(linear::logistic(z, y));
      break;
    case LearnerKind::random_forest:
      model = fit_forest(spec.forest, z, y, stream, diag);
      break;
    case LearnerKind::gradient_boosting:
      model = fit_boosting(spec.boosting, z, y, stream, diag);
      break;
    case LearnerKind::oracle:
      break;
  }
  const VectorXd fitted = model->predict(z, x);
  diag.in_sample_mse = (fitted - y).squaredNorm() / static_cast<double>(y.size());
  if (!fitted.allFinite()) throw NumericalError("learner '" + spec.display_name() + "' produced non-finite fits");
  return FittedLearner(spec, std::move(plan), std::move(model), inputs, diag);
}

FittedLearner oracle_learner(Cef truth, std::size_t input_columns) {
  LearnerSpec spec;
  spec.kind = LearnerKind::oracle;
  spec.name = "oracle";
  spec.truth = truth;
  return FittedLearner(spec, {}, std::make_shared<OracleModel>(std::move(truth)), input_columns, {});
}

}  // namespace ddml
