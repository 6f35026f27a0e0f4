#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ddml {

enum class StepKind { standardize, polynomial, two_way_interactions, spline };

struct TransformStep {
  StepKind kind = StepKind::standardize;
  int order = 2;              // polynomial
  bool interactions = false;  // polynomial: all monomials up to `order` instead of pure powers
  int knots = 3;              // spline
  int degree = 3;             // spline
  bool interact = false;      // spline: append pairwise products of the inputs

  static TransformStep standardize() { return {}; }
  static TransformStep polynomial(int order, bool interactions = false) {
    TransformStep s;
    s.kind = StepKind::polynomial;
    s.order = order;
    s.interactions = interactions;
    return s;
  }
  // The "poly2+interactions" expansion: x_j, x_j^2 and x_j*x_k.
  static TransformStep poly2_interactions() { return polynomial(2, true); }
  static TransformStep two_way() {
    TransformStep s;
    s.kind = StepKind::two_way_interactions;
    return s;
  }
  static TransformStep spline(int knots, int degree, bool interact) {
    TransformStep s;
    s.kind = StepKind::spline;
    s.knots = knots;
    s.degree = degree;
    s.interact = interact;
    return s;
  }
};

using TransformSpec = std::vector<TransformStep>;

// Number of output columns a step produces from `inputs` columns.
std::size_t step_output_columns(const TransformStep& step, std::size_t inputs);

// Monomials of a polynomial step, each a non-decreasing list of input column
// indices. Ordered by degree; within a degree pure powers come first, then
// mixed terms in lexicographic order.
std::vector<std::vector<int>> polynomial_terms(std::size_t inputs, int order, bool interactions);

struct FittedStep {
  TransformStep step;
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  Eigen::VectorXd mean;             // standardize
  Eigen::VectorXd scale;            // standardize
  std::vector<bool> constant;       // standardize: column passed through unscaled
  std::vector<std::vector<int>> terms;           // polynomial / interactions
  std::vector<std::vector<double>> knot_values;  // spline, per input column
};

// A transform whose parameters were learned on a training matrix. apply()
// never refits.
class TransformPlan {
 public:
  TransformPlan() = default;

  std::size_t input_columns() const { return inputs_; }
  std::size_t output_columns() const { return outputs_; }
  bool empty() const { return steps_.empty(); }
  const std::vector<FittedStep>& steps() const { return steps_; }
  // True if standardization met a constant column.
  bool has_constant_columns() const;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;

 private:
  friend TransformPlan fit_transform(const TransformSpec& spec, const Eigen::MatrixXd& x_train);
  std::vector<FittedStep> steps_;
  std::size_t inputs_ = 0;
  std::size_t outputs_ = 0;
};

TransformPlan fit_transform(const TransformSpec& spec, const Eigen::MatrixXd& x_train);

inline Eigen::MatrixXd apply_transform(const TransformPlan& plan, const Eigen::MatrixXd& x) {
  return plan.apply(x);
}

std::string to_string(StepKind kind);

}  // namespace ddml
