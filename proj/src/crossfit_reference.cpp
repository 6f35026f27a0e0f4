#include "ddml/crossfit.hpp"
#include "ddml/error.hpp"

namespace ddml::reference {

CrossFitMatrix cross_fit(const MatrixXd& x, const VectorXd& target, const std::vector<LearnerSpec>& learners,
                         const FoldAssignment& folds, const CrossFitOptions& options) {
  if (target.size() != x.rows()) throw ShapeError("target length does not match covariate rows");
  const auto layout = detail::plan_layout(folds, options, learners.size());
  auto out = detail::prepare_output(x, learners, folds, options, layout);
  for (const auto& task : layout.tasks) detail::run_task(task, layout, x, target, learners, folds, out);
  detail::finalize(out, target);
  return out;
}

}  // namespace ddml::reference
