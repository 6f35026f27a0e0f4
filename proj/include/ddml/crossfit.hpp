#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ddml/folds.hpp"
#include "ddml/learners.hpp"

namespace ddml {

// Cross-validated predictions inside one cross-fitting training set T_k.
struct NestedFold {
  std::vector<int> rows;     // training rows of T_k used for stacking (ascending)
  std::vector<int> cv_fold;  // v(i) for each entry of rows
  MatrixXd preds;            // rows.size() x J, learner j trained on T_k \ T_{k,v(i)}
};

struct CrossFitMatrix {
  Target target = Target::ell;
  int column = 0;  // treatment column for m targets
  MatrixXd preds;  // n x J out-of-fold predictions; column j of row i from learner j fitted on T_{k(i)}
  std::vector<LearnerSpec> learners;
  FoldAssignment folds;
  std::vector<NestedFold> nested;  // one per fold when nesting was requested
  int cv_folds = 0;
  std::vector<char> train_mask;    // empty: all rows eligible for training
  VectorXd mspe;                   // per learner, over eligible rows
  std::size_t fit_count = 0;

  std::size_t learner_count() const { return learners.size(); }
  bool has_nested() const { return !nested.empty(); }
  bool eligible(int row) const { return train_mask.empty() || train_mask[row] != 0; }
};

struct CrossFitOptions {
  bool with_nested = false;
  int cv_folds = 5;  // V
  Target target = Target::ell;
  int column = 0;
  // Restricts training (and stacking) rows, e.g. D == 0 rows for g0.
  std::vector<char> train_mask;
};

// Parallel over (fold, cv fold, learner) tasks. Every task draws its random
// stream from (folds.seed, k, v, j), so results do not depend on thread count
// or scheduling. A failing fit aborts the whole call with the fold and learner
// named in the message.
CrossFitMatrix cross_fit(const MatrixXd& x, const VectorXd& target, const std::vector<LearnerSpec>& learners,
                         const FoldAssignment& folds, const CrossFitOptions& options);

namespace reference {
// Plain nested loops; kept to check the parallel engine.
CrossFitMatrix cross_fit(const MatrixXd& x, const VectorXd& target, const std::vector<LearnerSpec>& learners,
                         const FoldAssignment& folds, const CrossFitOptions& options);
}  // namespace reference

// Number of candidate-learner fits a cross-fit performs.
inline std::size_t expected_fit_count(int k, int v, std::size_t j, bool nested) {
  return static_cast<std::size_t>(k) * j * (nested ? static_cast<std::size_t>(v) + 1 : 1);
}

// Writes row_id, fold (1-based), one column per learner.
void write_crossfit_csv(const CrossFitMatrix& cfm, const std::string& path);

namespace detail {
// Shared by both engines.
struct CrossFitTask {
  int fold;
  int cv;  // -1: refit on the whole T_k
  int learner;
};
struct CrossFitLayout {
  std::vector<std::vector<int>> holdout;      // I_k
  std::vector<std::vector<int>> train;        // eligible rows of T_k
  std::vector<FoldAssignment> inner;          // V-fold split of train[k]
  std::vector<CrossFitTask> tasks;
};
CrossFitLayout plan_layout(const FoldAssignment& folds, const CrossFitOptions& options, std::size_t learners);
LearnerSpec resolve_learner(const LearnerSpec& spec, Target target);
std::uint64_t task_seed(const FoldAssignment& folds, const CrossFitTask& task);
void run_task(const CrossFitTask& task, const CrossFitLayout& layout, const MatrixXd& x, const VectorXd& target,
              const std::vector<LearnerSpec>& learners, const FoldAssignment& folds, CrossFitMatrix& out);
CrossFitMatrix prepare_output(const MatrixXd& x, const std::vector<LearnerSpec>& learners, const FoldAssignment& folds,
                              const CrossFitOptions& options, const CrossFitLayout& layout);
void finalize(CrossFitMatrix& out, const VectorXd& target);
}  // namespace detail

}  // namespace ddml
