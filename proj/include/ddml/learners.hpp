#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "ddml/transform.hpp"

namespace ddml {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class LearnerKind { ols, ridge_cv, lasso_cv, random_forest, gradient_boosting, logistic, oracle };

std::string to_string(LearnerKind kind);
LearnerKind learner_kind_from_string(const std::string& name);

// Conditional expectation function evaluated on one covariate row.
using Cef = std::function<double(std::span<const double>)>;

// Nuisance functions a cross-fit can target.
enum class Target { ell, m, g0, g1 };
std::string to_string(Target t);

struct PenaltyParams {
  int cv_folds = 5;
  int grid_points = 100;
  double grid_ratio = 1e-4;  // smallest lambda relative to lambda_max
  double tolerance = 1e-7;
  std::optional<double> lambda;  // fixed penalty, skips cross-validation
};

struct ForestParams {
  int n_trees = 100;
  int max_features = 0;      // 0: ceil(p / 3)
  int min_node_size = 1;     // minimum observations per leaf
  double subsample_fraction = 1.0;
  bool bootstrap = true;     // draw the subsample with replacement
  int max_depth = -1;
};

struct BoostingParams {
  int n_trees = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
  int min_node_size = 1;
  int early_stopping_rounds = 0;  // 0 disables early stopping
  double validation_fraction = 0.1;
};

struct LearnerSpec {
  LearnerKind kind = LearnerKind::ols;
  std::string name;
  PenaltyParams penalty;
  ForestParams forest;
  BoostingParams boosting;
  TransformSpec transform;
  std::uint64_t seed_stream = 0;

  // Oracle learners: `truth` is used by fit(); cross-fitting resolves it from
  // `truth_by_target` for the nuisance being estimated.
  Cef truth;
  std::map<Target, Cef> truth_by_target;

  std::string display_name() const { return name.empty() ? to_string(kind) : name; }
};

// Hyperparameter presets used in the simulations.
LearnerSpec preset_learner(const std::string& preset);

struct FitDiagnostics {
  double in_sample_mse = 0.0;
  std::optional<double> penalty;
  bool rank_deficient = false;
  bool constant_target = false;
  bool constant_columns = false;
  int trees_used = 0;
};

class Model {
 public:
  virtual ~Model() = default;
  virtual VectorXd predict(const MatrixXd& features, const MatrixXd& raw) const = 0;
};

class FittedLearner {
 public:
  FittedLearner(LearnerSpec spec, TransformPlan plan, std::shared_ptr<const Model> model,
                std::size_t input_columns, FitDiagnostics diag);

  // Throws ShapeError if x has the wrong number of columns.
  VectorXd predict(const MatrixXd& x) const;

  const LearnerSpec& spec() const { return spec_; }
  const FitDiagnostics& diagnostics() const { return diag_; }
  const Model& model() const { return *model_; }
  std::size_t input_columns() const { return inputs_; }

 private:
  LearnerSpec spec_;
  TransformPlan plan_;
  std::shared_ptr<const Model> model_;
  std::size_t inputs_;
  FitDiagnostics diag_;
};

// `seed` is the task stream supplied by the caller; it is mixed with
// spec.seed_stream so two fits with identical inputs are identical.
FittedLearner fit(const LearnerSpec& spec, const MatrixXd& x, const VectorXd& y, std::uint64_t seed = 0);

inline VectorXd predict(const FittedLearner& model, const MatrixXd& x) { return model.predict(x); }

// A learner that ignores training data and returns truth(x).
FittedLearner oracle_learner(Cef truth, std::size_t input_columns = 0);

// Logistic predictions are clipped to [eps, 1 - eps].
inline constexpr double kProbabilityClip = 1e-6;

}  // namespace ddml
