// Parallel engines against their serial reference implementations.
//   ddml_bench --benchmark_filter=CrossFit
// Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "ddml/crossfit.hpp"
#include "ddml/simulation.hpp"

using namespace ddml;

namespace {

const Dataset& bench_data() {
  static const Dataset data = [] {
    DgpSpec s;
    s.kind = DgpKind::toy_nonlinear;
    s.n = 1000;
    return generate(calibrate_toy(s), 0xbe);
  }();
  return data;
}

std::vector<LearnerSpec> bench_learners() {
  auto rf = preset_learner("rf_low");
  rf.forest.n_trees = 50;
  auto gbt = preset_learner("gbt_low");
  gbt.boosting.n_trees = 100;
  return {preset_learner("ols"), preset_learner("lasso_cv"), rf, gbt};
}

template <bool Parallel>
void BM_CrossFit(benchmark::State& state) {
  const auto& data = bench_data();
  const auto learners = bench_learners();
  const auto folds = make_folds(data.rows(), 5, 1);
  CrossFitOptions opt;
  opt.with_nested = state.range(0) != 0;
  opt.cv_folds = 5;
  for (auto _ : state) {
    auto cfm = Parallel ? cross_fit(data.x, data.y, learners, folds, opt)
                        : reference::cross_fit(data.x, data.y, learners, folds, opt);
    benchmark::DoNotOptimize(cfm.preds.data());
    state.counters["fits"] = static_cast<double>(cfm.fit_count);
  }
}

template <bool Parallel>
void BM_MonteCarlo(benchmark::State& state) {
  DgpSpec s;
  s.n = 500;
  s = calibrate_toy(s);
  EstimatorBlock b;
  b.label = "stack";
  b.ddml.learners = {preset_learner("ols"), preset_learner("lasso_cv")};
  b.ddml.stacking = {{StackingMode::short_stacking, FinalLearner::cls}};
  MonteCarloOptions opt;
  opt.reps = static_cast<int>(state.range(0));
  opt.seed = 7;
  for (auto _ : state) {
    auto report = Parallel ? run_monte_carlo(s, {b}, opt) : reference::run_monte_carlo(s, {b}, opt);
    benchmark::DoNotOptimize(report.estimators.data());
  }
}

}  // namespace

BENCHMARK(BM_CrossFit<true>)->Name("CrossFit/parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_CrossFit<false>)->Name("CrossFit/reference")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MonteCarlo<true>)->Name("MonteCarlo/parallel")->Arg(16)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MonteCarlo<false>)->Name("MonteCarlo/reference")->Arg(16)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
