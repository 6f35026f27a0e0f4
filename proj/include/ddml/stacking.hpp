#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ddml/crossfit.hpp"

namespace ddml {

enum class StackingMode { conventional, short_stacking, pooled };
enum class FinalLearner { cls, ols, single_best, average };

std::string to_string(StackingMode mode);
std::string to_string(FinalLearner final);
StackingMode stacking_mode_from_string(const std::string& s);
FinalLearner final_learner_from_string(const std::string& s);

struct StackingWeights {
  StackingMode mode = StackingMode::short_stacking;
  FinalLearner final = FinalLearner::cls;
  MatrixXd weights;  // K x J for conventional, 1 x J otherwise
  VectorXd mspe;     // per-learner out-of-fold MSPE

  VectorXd mean_weights() const { return weights.colwise().mean().transpose(); }
};

struct StackingResult {
  StackingWeights weights;
  VectorXd predictions;  // n stacked out-of-fold predictions
};

struct ClsOptions {
  double tolerance = 1e-8;  // projected-gradient norm
  int max_iterations = 10000;
};

struct ClsReport {
  VectorXd weights;
  int iterations = 0;
  bool polished = false;
};

// Euclidean projection onto the probability simplex.
VectorXd project_to_simplex(const VectorXd& v);

// min ||y - P w||^2 / n' subject to w >= 0, sum(w) = 1. Projected gradient
// with Armijo backtracking from the uniform vector, followed by an exact
// equality-constrained solve on the identified support when that solve stays
// feasible and does not increase the objective.
ClsReport cls_solve_detailed(const MatrixXd& p, const VectorXd& y, const ClsOptions& options = {});
inline VectorXd cls_solve(const MatrixXd& p, const VectorXd& y, const ClsOptions& options = {}) {
  return cls_solve_detailed(p, y, options).weights;
}

double cls_objective(const MatrixXd& p, const VectorXd& y, const VectorXd& w);

// Largest violation of the simplex KKT conditions for the objective above:
// gradients on the support must be equal (to mu, their minimum) and gradients
// off the support must be at least mu.
double cls_kkt_residual(const MatrixXd& p, const VectorXd& y, const VectorXd& w);

VectorXd final_learn(FinalLearner final, const MatrixXd& p, const VectorXd& y);

// Stacking over a CrossFitMatrix; `target` holds the full-length values the
// nuisance is fitted to. Rows outside the cross-fit's training mask never
// enter a weight estimation.
StackingResult stack_conventional(const CrossFitMatrix& cfm, const VectorXd& target, FinalLearner final = FinalLearner::cls);
StackingResult stack_short(const CrossFitMatrix& cfm, const VectorXd& target, FinalLearner final = FinalLearner::cls);
StackingResult stack_pooled(const CrossFitMatrix& cfm, const VectorXd& target, FinalLearner final = FinalLearner::cls);
StackingResult stack(StackingMode mode, const CrossFitMatrix& cfm, const VectorXd& target, FinalLearner final);

inline bool needs_nested(StackingMode mode) { return mode != StackingMode::short_stacking; }

}  // namespace ddml
