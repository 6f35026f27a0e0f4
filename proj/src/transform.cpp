#include "ddml/transform.hpp"

#include <algorithm>
#include <cmath>

#include "ddml/error.hpp"

namespace ddml {

std::string to_string(StepKind kind) {
  switch (kind) {
    case StepKind::standardize: return "standardize";
    case StepKind::polynomial: return "polynomial";
    case StepKind::two_way_interactions: return "two_way_interactions";
    case StepKind::spline: return "spline";
  }
  return "unknown";
}

namespace {

void check_step(const TransformStep& step) {
  if (step.kind == StepKind::polynomial && step.order < 1)
    throw ConfigError("polynomial order must be >= 1");
  if (step.kind == StepKind::spline) {
    if (step.degree < 1) throw ConfigError("spline degree must be >= 1");
    if (step.knots < 1) throw ConfigError("spline needs at least one knot");
  }
}

// Combinations with repetition of `degree` indices out of `inputs`, in
// lexicographic order.
void combos(std::size_t inputs, int degree, std::vector<int>& current, int start,
            std::vector<std::vector<int>>& out) {
  if (static_cast<int>(current.size()) == degree) {
    out.push_back(current);
    return;
  }
  for (int j = start; j < static_cast<int>(inputs); ++j) {
    current.push_back(j);
    combos(inputs, degree, current, j, out);
    current.pop_back();
  }
}

double quantile_sorted(const std::vector<double>& sorted, double prob) {
  if (sorted.size() == 1) return sorted.front();
  const double pos = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double ipow(double v, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= v;
  return r;
}

FittedStep fit_step(const TransformStep& step, const Eigen::MatrixXd& x) {
  FittedStep f;
  f.step = step;
  f.inputs = static_cast<std::size_t>(x.cols());
  f.outputs = step_output_columns(step, f.inputs);
  const auto n = static_cast<double>(x.rows());
  switch (step.kind) {
    case StepKind::standardize: {
      f.mean.resize(x.cols());
      f.scale.resize(x.cols());
      f.constant.assign(f.inputs, false);
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double mu = x.col(c).mean();
        const double var = (x.col(c).array() - mu).square().sum() / n;
        const double sd = std::sqrt(var);
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mu)))) {
          f.constant[c] = true;
          f.mean[c] = 0.0;
          f.scale[c] = 1.0;
        } else {
          f.mean[c] = mu;
          f.scale[c] = sd;
        }
      }
      break;
    }
    case StepKind::polynomial:
      f.terms = polynomial_terms(f.inputs, step.order, step.interactions);
      break;
    case StepKind::two_way_interactions:
      for (std::size_t j = 0; j < f.inputs; ++j) f.terms.push_back({static_cast<int>(j)});
      for (std::size_t j = 0; j < f.inputs; ++j)
        for (std::size_t k = j + 1; k < f.inputs; ++k) f.terms.push_back({static_cast<int>(j), static_cast<int>(k)});
      break;
    case StepKind::spline: {
      f.knot_values.resize(f.inputs);
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        std::vector<double> v(x.col(c).data(), x.col(c).data() + x.rows());
        std::sort(v.begin(), v.end());
        for (int m = 1; m <= step.knots; ++m)
          f.knot_values[c].push_back(quantile_sorted(v, static_cast<double>(m) / (step.knots + 1)));
      }
      break;
    }
  }
  return f;
}

Eigen::MatrixXd apply_step(const FittedStep& f, const Eigen::MatrixXd& x) {
  if (static_cast<std::size_t>(x.cols()) != f.inputs)
    throw ShapeError("transform expects " + std::to_string(f.inputs) + " columns, got " +
                     std::to_string(x.cols()));
  const auto n = x.rows();
  Eigen::MatrixXd out(n, static_cast<Eigen::Index>(f.outputs));
  switch (f.step.kind) {
    case StepKind::standardize:
      for (Eigen::Index c = 0; c < x.cols(); ++c)
        out.col(c) = (x.col(c).array() - f.mean[c]) / f.scale[c];
      break;
    case StepKind::polynomial:
    case StepKind::two_way_interactions:
      for (std::size_t t = 0; t < f.terms.size(); ++t) {
        auto col = out.col(static_cast<Eigen::Index>(t));
        col.setOnes();
        for (int j : f.terms[t]) col.array() *= x.col(j).array();
      }
      break;
    case StepKind::spline: {
      Eigen::Index c_out = 0;
      const int degree = f.step.degree;
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        for (int k = 1; k <= degree; ++k) {
          for (Eigen::Index i = 0; i < n; ++i) out(i, c_out) = ipow(x(i, c), k);
          ++c_out;
        }
        for (double knot : f.knot_values[c]) {
          for (Eigen::Index i = 0; i < n; ++i) out(i, c_out) = ipow(std::max(0.0, x(i, c) - knot), degree);
          ++c_out;
        }
      }
      if (f.step.interact)
        for (Eigen::Index j = 0; j < x.cols(); ++j)
          for (Eigen::Index k = j + 1; k < x.cols(); ++k) out.col(c_out++) = x.col(j).cwiseProduct(x.col(k));
      break;
    }
  }
  return out;
}

}  // namespace

std::vector<std::vector<int>> polynomial_terms(std::size_t inputs, int order, bool interactions) {
  std::vector<std::vector<int>> terms;
  for (int deg = 1; deg <= order; ++deg) {
    for (std::size_t j = 0; j < inputs; ++j) terms.emplace_back(deg, static_cast<int>(j));
    if (!interactions || deg == 1) continue;
    std::vector<std::vector<int>> all;
    std::vector<int> current;
    combos(inputs, deg, current, 0, all);
    for (auto& t : all)
      if (t.front() != t.back()) terms.push_back(std::move(t));
  }
  return terms;
}

std::size_t step_output_columns(const TransformStep& step, std::size_t p) {
  switch (step.kind) {
    case StepKind::standardize: return p;
    case StepKind::polynomial: {
      if (!step.interactions) return p * static_cast<std::size_t>(step.order);
      // Monomials of total degree 1..order: C(p + order, order) - 1.
      std::size_t c = 1;
      for (int i = 1; i <= step.order; ++i) c = c * (p + static_cast<std::size_t>(i)) / static_cast<std::size_t>(i);
      return c - 1;
    }
    case StepKind::two_way_interactions: return p + p * (p - (p > 0 ? 1 : 0)) / 2;
    case StepKind::spline:
      return p * static_cast<std::size_t>(step.degree + step.knots) +
             (step.interact ? p * (p - (p > 0 ? 1 : 0)) / 2 : 0);
  }
  return 0;
}

bool TransformPlan::has_constant_columns() const {
  for (const auto& s : steps_)
    for (bool c : s.constant)
      if (c) return true;
  return false;
}

Eigen::MatrixXd TransformPlan::apply(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.cols()) != inputs_)
    throw ShapeError("transform expects " + std::to_string(inputs_) + " columns, got " +
                     std::to_string(x.cols()));
  Eigen::MatrixXd cur = x;
  for (const auto& s : steps_) cur = apply_step(s, cur);
  return cur;
}

TransformPlan fit_transform(const TransformSpec& spec, const Eigen::MatrixXd& x_train) {
  TransformPlan plan;
  plan.inputs_ = static_cast<std::size_t>(x_train.cols());
  Eigen::MatrixXd cur = x_train;
  for (const auto& step : spec) {
    check_step(step);
    plan.steps_.push_back(fit_step(step, cur));
    cur = apply_step(plan.steps_.back(), cur);
  }
  plan.outputs_ = static_cast<std::size_t>(cur.cols());
  return plan;
}

}  // namespace ddml
