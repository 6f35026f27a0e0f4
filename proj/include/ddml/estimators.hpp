#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ddml/folds.hpp"

namespace ddml {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kNormalQuantile975 = 1.959964;

struct EstimateMethod {
  std::string estimator;  // "plm" or "atet"
  std::string variant;    // learner name or stacking mode/final
  int folds = 0;
  int cv_folds = 0;
  int repetitions = 1;
};

struct PointEstimate {
  VectorXd theta;
  VectorXd se;
  VectorXd ci_low;
  VectorXd ci_high;
  std::size_t n = 0;
  EstimateMethod method;
};

enum class Aggregation { median, mean };
std::string to_string(Aggregation how);
Aggregation aggregation_from_string(const std::string& s);

struct RepetitionSet {
  std::vector<PointEstimate> repetitions;
  PointEstimate aggregate;
  Aggregation how = Aggregation::median;
};

// Residual-on-residual estimate with HC0 standard errors. Dispatches to the
// scalar formula for one treatment column and to the matrix form otherwise.
PointEstimate plm_estimate(const VectorXd& y, const MatrixXd& d, const VectorXd& ell_hat, const MatrixXd& m_hat);
PointEstimate plm_estimate_scalar(const VectorXd& y, const VectorXd& d, const VectorXd& ell_hat, const VectorXd& m_hat);
PointEstimate plm_estimate_vector(const VectorXd& y, const MatrixXd& d, const VectorXd& ell_hat, const MatrixXd& m_hat);

struct AtetEstimate {
  PointEstimate estimate;
  VectorXd summands;       // per-observation score terms; their mean is theta
  std::size_t clipped = 0; // propensities moved into [eps, 1 - eps]
};

// `p_hat` holds, for each row, the treated share of that row's cross-fitting
// training set.
AtetEstimate atet_estimate(const VectorXd& y, const VectorXd& d, const VectorXd& g0_hat, const VectorXd& m_hat,
                           const VectorXd& p_hat, double clip = 1e-6);

// Treated share of T_{k(i)} for every row. Throws DataError if any training
// set lacks treated or control rows.
VectorXd fold_treated_share(const VectorXd& d, const FoldAssignment& folds);

// median: theta = elementwise median, se = median_r sqrt(se_r^2 + (theta_r - theta)^2).
// mean: the same with arithmetic means.
PointEstimate aggregate_repetitions(const std::vector<PointEstimate>& estimates, Aggregation how);

double median(std::vector<double> values);

}  // namespace ddml
