#include "ddml/crossfit.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>

#include "ddml/error.hpp"
#include "ddml/rng.hpp"

namespace ddml {

std::vector<int> FoldAssignment::members(int fold) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < n; ++i)
    if (fold_of[i] == fold) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> FoldAssignment::complement(int fold) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < n; ++i)
    if (fold_of[i] != fold) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<std::size_t> FoldAssignment::sizes() const {
  std::vector<std::size_t> s(static_cast<std::size_t>(k), 0);
  for (int f : fold_of) ++s[f];
  return s;
}

namespace {

void check_fold_count(std::size_t n, int k) {
  if (k < 2) throw ConfigError("fold count must be at least 2, got " + std::to_string(k));
  if (static_cast<std::size_t>(k) > n)
    throw ConfigError("fold count " + std::to_string(k) + " exceeds sample size " + std::to_string(n));
}

}  // namespace

FoldAssignment make_folds(std::size_t n, int k, std::uint64_t seed) {
  check_fold_count(n, k);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = make_rng(seed, {0xf01d});
  std::shuffle(perm.begin(), perm.end(), rng);
  FoldAssignment fa;
  fa.n = n;
  fa.k = k;
  fa.seed = seed;
  fa.fold_of.assign(n, 0);
  for (std::size_t t = 0; t < n; ++t) fa.fold_of[perm[t]] = static_cast<int>(t % static_cast<std::size_t>(k));
  return fa;
}

FoldAssignment make_stratified_folds(const std::vector<int>& strata, int k, std::uint64_t seed) {
  const std::size_t n = strata.size();
  check_fold_count(n, k);
  std::set<int> labels(strata.begin(), strata.end());
  Rng rng = make_rng(seed, {0x57a7});
  FoldAssignment fa;
  fa.n = n;
  fa.k = k;
  fa.seed = seed;
  fa.fold_of.assign(n, 0);
  std::size_t t = 0;
  for (int label : labels) {
    std::vector<int> members;
    for (std::size_t i = 0; i < n; ++i)
      if (strata[i] == label) members.push_back(static_cast<int>(i));
    std::shuffle(members.begin(), members.end(), rng);
    for (int i : members) fa.fold_of[i] = static_cast<int>(t++ % static_cast<std::size_t>(k));
  }
  return fa;
}

std::vector<std::uint64_t> repeat_plan(int repetitions, std::uint64_t base_seed) {
  if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
  std::vector<std::uint64_t> seeds{base_seed};
  std::set<std::uint64_t> seen{base_seed};
  for (int r = 1; r < repetitions; ++r) {
    std::uint64_t s = derive_seed(base_seed, {static_cast<std::uint64_t>(r)});
    while (!seen.insert(s).second) s = splitmix64(s);
    seeds.push_back(s);
  }
  return seeds;
}

namespace detail {

CrossFitLayout plan_layout(const FoldAssignment& folds, const CrossFitOptions& options, std::size_t learners) {
  if (learners == 0) throw ConfigError("cross-fitting needs at least one learner");
  if (!options.train_mask.empty() && options.train_mask.size() != folds.n)
    throw ShapeError("training mask length does not match the sample size");
  if (options.with_nested && options.cv_folds < 2) throw ConfigError("nested cross-validation needs V >= 2");
  CrossFitLayout layout;
  layout.holdout.resize(static_cast<std::size_t>(folds.k));
  layout.train.resize(static_cast<std::size_t>(folds.k));
  for (std::size_t i = 0; i < folds.n; ++i) {
    const int f = folds.fold_of[i];
    layout.holdout[f].push_back(static_cast<int>(i));
    const bool ok = options.train_mask.empty() || options.train_mask[i];
    if (!ok) continue;
    for (int k = 0; k < folds.k; ++k)
      if (k != f) layout.train[k].push_back(static_cast<int>(i));
  }
  for (int k = 0; k < folds.k; ++k) {
    if (layout.train[k].size() < 2)
      throw DataError("cross-fitting fold " + std::to_string(k + 1) + " has fewer than 2 training rows");
    if (options.with_nested) {
      if (layout.train[k].size() < static_cast<std::size_t>(options.cv_folds))
        throw ConfigError("training set of fold " + std::to_string(k + 1) + " is smaller than V");
      layout.inner.push_back(make_folds(layout.train[k].size(), options.cv_folds,
                                        derive_seed(folds.seed, {static_cast<std::uint64_t>(k), 0x6e57})));
    }
  }
  for (int k = 0; k < folds.k; ++k) {
    if (options.with_nested)
      for (int v = 0; v < options.cv_folds; ++v)
        for (std::size_t j = 0; j < learners; ++j) layout.tasks.push_back({k, v, static_cast<int>(j)});
    for (std::size_t j = 0; j < learners; ++j) layout.tasks.push_back({k, -1, static_cast<int>(j)});
  }
  return layout;
}

LearnerSpec resolve_learner(const LearnerSpec& spec, Target target) {
  if (spec.kind != LearnerKind::oracle || spec.truth) return spec;
  auto it = spec.truth_by_target.find(target);
  if (it == spec.truth_by_target.end())
    throw ConfigError("oracle learner '" + spec.display_name() + "' has no truth for target " + to_string(target));
  LearnerSpec out = spec;
  out.truth = it->second;
  return out;
}

std::uint64_t task_seed(const FoldAssignment& folds, const CrossFitTask& task) {
  return derive_seed(folds.seed, {static_cast<std::uint64_t>(task.fold), static_cast<std::uint64_t>(task.cv + 1),
                                  static_cast<std::uint64_t>(task.learner)});
}

namespace {

MatrixXd gather(const MatrixXd& x, const std::vector<int>& rows) {
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

VectorXd gather(const VectorXd& y, const std::vector<int>& rows) {
  VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = y[rows[i]];
  return out;
}

}  // namespace

void run_task(const CrossFitTask& task, const CrossFitLayout& layout, const MatrixXd& x, const VectorXd& target,
              const std::vector<LearnerSpec>& learners, const FoldAssignment& folds, CrossFitMatrix& out) {
  const auto& spec = out.learners[task.learner];
  try {
    const auto& train_k = layout.train[task.fold];
    std::vector<int> train_rows;
    std::vector<int> predict_pos;  // positions within train_k, nested tasks only
    if (task.cv < 0) {
      train_rows = train_k;
    } else {
      const auto& inner = layout.inner[task.fold];
      for (std::size_t t = 0; t < train_k.size(); ++t) {
        if (inner.fold_of[t] == task.cv) predict_pos.push_back(static_cast<int>(t));
        else train_rows.push_back(train_k[t]);
      }
    }
    const auto model = fit(spec, gather(x, train_rows), gather(target, train_rows), task_seed(folds, task));
    if (task.cv < 0) {
      const auto& rows = layout.holdout[task.fold];
      const VectorXd p = model.predict(gather(x, rows));
      for (std::size_t i = 0; i < rows.size(); ++i) out.preds(rows[i], task.learner) = p[static_cast<Eigen::Index>(i)];
    } else {
      std::vector<int> rows;
      for (int pos : predict_pos) rows.push_back(train_k[pos]);
      const VectorXd p = model.predict(gather(x, rows));
      auto& nested = out.nested[task.fold].preds;
      for (std::size_t i = 0; i < predict_pos.size(); ++i) nested(predict_pos[i], task.learner) = p[static_cast<Eigen::Index>(i)];
    }
  } catch (const Error& e) {
    (void)learners;
    throw Error(e.kind(), "learner '" + spec.display_name() + "' failed on fold " + std::to_string(task.fold + 1) +
                              (task.cv >= 0 ? " (cv fold " + std::to_string(task.cv + 1) + ")" : std::string()) +
                              ": " + e.what());
  } catch (const std::exception& e) {
    throw NumericalError("learner '" + spec.display_name() + "' failed on fold " + std::to_string(task.fold + 1) + ": " +
                         e.what());
  }
}

CrossFitMatrix prepare_output(const MatrixXd& x, const std::vector<LearnerSpec>& learners, const FoldAssignment& folds,
                              const CrossFitOptions& options, const CrossFitLayout& layout) {
  if (static_cast<std::size_t>(x.rows()) != folds.n) throw ShapeError("fold assignment does not match the sample size");
  CrossFitMatrix out;
  out.target = options.target;
  out.column = options.column;
  out.folds = folds;
  out.cv_folds = options.with_nested ? options.cv_folds : 0;
  out.train_mask = options.train_mask;
  const auto j = static_cast<Eigen::Index>(learners.size());
  out.preds = MatrixXd::Zero(static_cast<Eigen::Index>(folds.n), j);
  for (const auto& spec : learners) out.learners.push_back(resolve_learner(spec, options.target));
  if (options.with_nested) {
    for (int k = 0; k < folds.k; ++k) {
      NestedFold nf;
      nf.rows = layout.train[k];
      nf.cv_fold = layout.inner[k].fold_of;
      nf.preds = MatrixXd::Zero(static_cast<Eigen::Index>(nf.rows.size()), j);
      out.nested.push_back(std::move(nf));
    }
  }
  out.fit_count = layout.tasks.size();
  return out;
}

void finalize(CrossFitMatrix& out, const VectorXd& target) {
  const auto j = out.preds.cols();
  out.mspe = VectorXd::Zero(j);
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < out.preds.rows(); ++i) {
    if (!out.eligible(static_cast<int>(i))) continue;
    ++count;
    for (Eigen::Index c = 0; c < j; ++c) {
      const double e = out.preds(i, c) - target[i];
      out.mspe[c] += e * e;
    }
  }
  if (count > 0) out.mspe /= static_cast<double>(count);
}

}  // namespace detail

CrossFitMatrix cross_fit(const MatrixXd& x, const VectorXd& target, const std::vector<LearnerSpec>& learners,
                         const FoldAssignment& folds, const CrossFitOptions& options) {
  if (target.size() != x.rows()) throw ShapeError("target length does not match covariate rows");
  const auto layout = detail::plan_layout(folds, options, learners.size());
  auto out = detail::prepare_output(x, learners, folds, options, layout);
  const auto n_tasks = static_cast<long>(layout.tasks.size());
  std::vector<std::exception_ptr> errors(layout.tasks.size());

#pragma omp parallel for schedule(dynamic, 1)
  for (long t = 0; t < n_tasks; ++t) {
    try {
      detail::run_task(layout.tasks[t], layout, x, target, learners, folds, out);
    } catch (...) {
      errors[t] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  detail::finalize(out, target);
  return out;
}

void write_crossfit_csv(const CrossFitMatrix& cfm, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "row_id,fold";
  for (const auto& l : cfm.learners) out << ',' << l.display_name();
  out << '\n' << std::setprecision(17);
  for (Eigen::Index i = 0; i < cfm.preds.rows(); ++i) {
    out << i + 1 << ',' << cfm.folds.fold_of[i] + 1;
    for (Eigen::Index j = 0; j < cfm.preds.cols(); ++j) out << ',' << cfm.preds(i, j);
    out << '\n';
  }
}

}  // namespace ddml
