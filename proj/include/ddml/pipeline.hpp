#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ddml/crossfit.hpp"
#include "ddml/data.hpp"
#include "ddml/estimators.hpp"
#include "ddml/stacking.hpp"

namespace ddml {

struct StackingVariant {
  StackingMode mode = StackingMode::short_stacking;
  FinalLearner final = FinalLearner::cls;
  std::string name() const { return to_string(mode) + "/" + to_string(final); }
};

struct DdmlConfig {
  std::vector<LearnerSpec> learners;            // outcome nuisance (ell or g0)
  std::vector<LearnerSpec> treatment_learners;  // m; empty reuses `learners`
  std::vector<StackingVariant> stacking;
  bool individual = true;  // also report DDML with each candidate on its own
  int folds = 5;
  int cv_folds = 5;
  int repetitions = 1;
  Aggregation aggregation = Aggregation::median;
  bool stratify = false;  // stratify folds on a binary first treatment column

  const std::vector<LearnerSpec>& m_learners() const {
    return treatment_learners.empty() ? learners : treatment_learners;
  }
  bool needs_nested() const;
  void validate() const;  // throws ConfigError
};

struct TargetWeights {
  Target target = Target::ell;
  int column = 0;
  MatrixXd weights;  // K x J or 1 x J
  VectorXd mspe;
};

struct VariantResult {
  std::string name;
  bool stacked = false;
  StackingVariant variant;
  int learner = -1;  // candidate index for individual variants
  RepetitionSet estimates;
  std::vector<std::vector<TargetWeights>> weights;  // [repetition][target], stacked variants only
  std::vector<std::size_t> clipped;                 // ATET: clipped propensities per repetition
};

struct TargetSummary {
  Target target = Target::ell;
  int column = 0;
  std::vector<std::string> learners;
  VectorXd mspe;
  std::size_t fit_count = 0;
};

struct RepetitionInfo {
  std::uint64_t seed = 0;
  std::vector<TargetSummary> targets;
};

struct DdmlResult {
  std::string estimator;
  std::size_t n = 0;
  std::vector<VariantResult> variants;
  std::vector<RepetitionInfo> repetitions;
  std::size_t fit_count = 0;

  const VariantResult& variant(const std::string& name) const;
};

// Cross-fits every nuisance once per repetition (all targets share that
// repetition's folds) and evaluates every requested variant on the same
// cross-fitted predictions.
DdmlResult run_plm(const Dataset& data, const DdmlConfig& config, std::uint64_t seed);
DdmlResult run_atet(const Dataset& data, const DdmlConfig& config, std::uint64_t seed);

// Names of the variants a run reports, in report order.
std::vector<std::string> variant_names(const DdmlConfig& config);

FoldAssignment make_repetition_folds(const Dataset& data, const DdmlConfig& config, std::uint64_t seed);

}  // namespace ddml
