#include "ddml/pipeline.hpp"

#include "ddml/error.hpp"

namespace ddml {

bool DdmlConfig::needs_nested() const {
  for (const auto& v : stacking)
    if (ddml::needs_nested(v.mode)) return true;
  return false;
}

void DdmlConfig::validate() const {
  if (learners.empty()) throw ConfigError("learner list is empty");
  if (folds < 2) throw ConfigError("K must be at least 2");
  if (needs_nested() && cv_folds < 2) throw ConfigError("V must be at least 2 for conventional or pooled stacking");
  if (repetitions < 1) throw ConfigError("R must be at least 1");
  if (individual && m_learners().size() != learners.size())
    throw ConfigError("individual estimates need as many treatment learners as outcome learners");
  if (!individual && stacking.empty()) throw ConfigError("no estimator variants requested");
}

const VariantResult& DdmlResult::variant(const std::string& name) const {
  for (const auto& v : variants)
    if (v.name == name) return v;
  throw ContractError("no variant named '" + name + "'");
}

FoldAssignment make_repetition_folds(const Dataset& data, const DdmlConfig& config, std::uint64_t seed) {
  if (!config.stratify) return make_folds(data.rows(), config.folds, seed);
  if (!is_binary(data.d.col(0))) throw ConfigError("stratified folds need a binary treatment");
  std::vector<int> strata(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i) strata[i] = static_cast<int>(data.d(static_cast<Eigen::Index>(i), 0));
  return make_stratified_folds(strata, config.folds, seed);
}

namespace {

std::vector<VariantResult> make_variants(const DdmlConfig& config) {
  std::vector<VariantResult> out;
  if (config.individual)
    for (std::size_t j = 0; j < config.learners.size(); ++j) {
      VariantResult v;
      v.name = config.learners[j].display_name();
      if (config.m_learners()[j].display_name() != v.name) v.name += "+" + config.m_learners()[j].display_name();
      v.learner = static_cast<int>(j);
      out.push_back(std::move(v));
    }
  for (const auto& s : config.stacking) {
    VariantResult v;
    v.name = s.name();
    v.stacked = true;
    v.variant = s;
    out.push_back(std::move(v));
  }
  return out;
}

void set_method(PointEstimate& est, const std::string& estimator, const VariantResult& v, const DdmlConfig& c) {
  est.method.estimator = estimator;
  est.method.variant = v.name;
  est.method.folds = c.folds;
  est.method.cv_folds = c.needs_nested() ? c.cv_folds : 0;
  est.method.repetitions = c.repetitions;
}

TargetSummary summarize(const CrossFitMatrix& cfm) {
  TargetSummary s;
  s.target = cfm.target;
  s.column = cfm.column;
  for (const auto& l : cfm.learners) s.learners.push_back(l.display_name());
  s.mspe = cfm.mspe;
  s.fit_count = cfm.fit_count;
  return s;
}

// Nuisance predictions for one variant: either a single candidate column or a
// stacked combination.
VectorXd nuisance(const VariantResult& v, const CrossFitMatrix& cfm, const VectorXd& target,
                  std::vector<TargetWeights>* weights) {
  if (!v.stacked) return cfm.preds.col(v.learner);
  auto res = stack(v.variant.mode, cfm, target, v.variant.final);
  if (weights) weights->push_back({cfm.target, cfm.column, res.weights.weights, res.weights.mspe});
  return res.predictions;
}

void finish(DdmlResult& result, const DdmlConfig& config) {
  for (auto& v : result.variants)
    v.estimates.aggregate = aggregate_repetitions(v.estimates.repetitions, config.aggregation);
  for (auto& v : result.variants) v.estimates.how = config.aggregation;
}

}  // namespace

std::vector<std::string> variant_names(const DdmlConfig& config) {
  std::vector<std::string> out;
  for (const auto& v : make_variants(config)) out.push_back(v.name);
  return out;
}

DdmlResult run_plm(const Dataset& data, const DdmlConfig& config, std::uint64_t seed) {
  config.validate();
  DdmlResult result;
  result.estimator = "plm";
  result.n = data.rows();
  result.variants = make_variants(config);
  const auto q = static_cast<int>(data.treatment_count());

  for (std::uint64_t rep_seed : repeat_plan(config.repetitions, seed)) {
    const auto folds = make_repetition_folds(data, config, rep_seed);
    CrossFitOptions opt;
    opt.with_nested = config.needs_nested();
    opt.cv_folds = config.cv_folds;
    opt.target = Target::ell;
    const auto ell = cross_fit(data.x, data.y, config.learners, folds, opt);
    std::vector<CrossFitMatrix> ms;
    for (int c = 0; c < q; ++c) {
      opt.target = Target::m;
      opt.column = c;
      ms.push_back(cross_fit(data.x, data.d.col(c), config.m_learners(), folds, opt));
    }
    RepetitionInfo info;
    info.seed = rep_seed;
    info.targets.push_back(summarize(ell));
    for (const auto& m : ms) info.targets.push_back(summarize(m));
    for (const auto& t : info.targets) result.fit_count += t.fit_count;
    result.repetitions.push_back(std::move(info));

    for (auto& v : result.variants) {
      std::vector<TargetWeights> weights;
      const VectorXd ell_hat = nuisance(v, ell, data.y, &weights);
      MatrixXd m_hat(data.rows(), q);
      for (int c = 0; c < q; ++c) m_hat.col(c) = nuisance(v, ms[c], data.d.col(c), &weights);
      auto est = plm_estimate(data.y, data.d, ell_hat, m_hat);
      set_method(est, "plm", v, config);
      v.estimates.repetitions.push_back(std::move(est));
      if (v.stacked) v.weights.push_back(std::move(weights));
    }
  }
  finish(result, config);
  return result;
}

DdmlResult run_atet(const Dataset& data, const DdmlConfig& config, std::uint64_t seed) {
  config.validate();
  if (data.treatment_count() != 1) throw ConfigError("ATET needs exactly one treatment column");
  if (!is_binary(data.d.col(0))) throw ConfigError("treatment not binary");
  DdmlResult result;
  result.estimator = "atet";
  result.n = data.rows();
  result.variants = make_variants(config);
  const VectorXd d = data.d.col(0);
  std::vector<char> controls(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i) controls[i] = d[static_cast<Eigen::Index>(i)] == 0.0;

  for (std::uint64_t rep_seed : repeat_plan(config.repetitions, seed)) {
    const auto folds = make_repetition_folds(data, config, rep_seed);
    const VectorXd p_hat = fold_treated_share(d, folds);
    CrossFitOptions opt;
    opt.with_nested = config.needs_nested();
    opt.cv_folds = config.cv_folds;
    opt.target = Target::g0;
    opt.train_mask = controls;
    const auto g0 = cross_fit(data.x, data.y, config.learners, folds, opt);
    opt.target = Target::m;
    opt.train_mask.clear();
    const auto m = cross_fit(data.x, d, config.m_learners(), folds, opt);
    RepetitionInfo info;
    info.seed = rep_seed;
    info.targets = {summarize(g0), summarize(m)};
    result.fit_count += g0.fit_count + m.fit_count;
    result.repetitions.push_back(std::move(info));

    for (auto& v : result.variants) {
      std::vector<TargetWeights> weights;
      const VectorXd g0_hat = nuisance(v, g0, data.y, &weights);
      const VectorXd m_hat = nuisance(v, m, d, &weights);
      auto res = atet_estimate(data.y, d, g0_hat, m_hat, p_hat);
      set_method(res.estimate, "atet", v, config);
      v.estimates.repetitions.push_back(std::move(res.estimate));
      v.clipped.push_back(res.clipped);
      if (v.stacked) v.weights.push_back(std::move(weights));
    }
  }
  finish(result, config);
  return result;
}

}  // namespace ddml
