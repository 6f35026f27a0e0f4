#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ddml/data.hpp"
#include "ddml/learners.hpp"
#include "ddml/pipeline.hpp"
#include "ddml/rng.hpp"

namespace ddml {

enum class DgpKind { toy_linear, toy_nonlinear, calibrated, atet_confounded, bootstrap };
enum class CalibrationEngine { linear, gradient_boosting };

std::string to_string(DgpKind kind);
DgpKind dgp_kind_from_string(const std::string& s);
std::string to_string(CalibrationEngine engine);
CalibrationEngine calibration_engine_from_string(const std::string& s);

// Generative models fitted to a real sample, plus that sample's covariates.
struct GenerativeModel {
  CalibrationEngine engine = CalibrationEngine::linear;
  MatrixXd x;         // empirical covariate distribution
  VectorXd g_values;  // g~(x_i) for every row of x
  VectorXd h_values;  // h~(x_i)
  double theta_ols = 0.0;
  std::shared_ptr<const FittedLearner> g_tilde;
  std::shared_ptr<const FittedLearner> h_tilde;
};

struct DgpSpec {
  DgpKind kind = DgpKind::toy_linear;
  std::size_t n = 1000;
  double theta0 = 0.5;

  // toy designs
  int dim = 13;
  double rho = 0.5;
  double c_y = 0.0, c_d = 0.0;
  bool calibrated_scales = false;  // c_y, c_d filled by calibrate_toy
  bool literal_g = false;          // X5*X5 instead of X4*X5 in the nonlinear g
  double r2_target = 0.5;

  // calibrated design; noise scales are standard deviations
  double kappa1 = 0.35;
  double kappa2 = 55500.0;
  std::shared_ptr<const GenerativeModel> model;

  // bootstrap-subsample design: rows drawn with replacement from `source`
  std::shared_ptr<const Dataset> source;

  std::uint64_t seed = 0;
};

// Nuisance functions of the toy designs.
double toy_g(const DgpSpec& spec, std::span<const double> x);

// Solves for c_y and c_d by bisection on a 50,000-draw pre-simulation so that
// the population R^2 of D on X and of Y on X are both r2_target.
DgpSpec calibrate_toy(DgpSpec spec);

// Covariates from N(0, Sigma), Sigma_jk = rho^|j-k|.
MatrixXd draw_correlated_normals(std::size_t n, int dim, double rho, Rng& rng);

Dataset generate_toy(const DgpSpec& spec, std::uint64_t seed);
Dataset generate_atet(const DgpSpec& spec, std::uint64_t seed);
Dataset generate_calibrated(const DgpSpec& spec, std::size_t n_b, std::uint64_t seed);
Dataset generate_bootstrap(const DgpSpec& spec, std::size_t n_b, std::uint64_t seed);
Dataset generate(const DgpSpec& spec, std::uint64_t seed);

// Coefficient on d from OLS of y on (1, d, x).
double theta_ols(const Dataset& data);

// Fits g~ to y - theta_OLS d and h~ to d. Throws ConfigError unless the
// treatment is a single binary column.
DgpSpec calibrate_generative(const Dataset& data, CalibrationEngine engine);

// Oracle learner returning the true nuisance for each target of the design.
LearnerSpec oracle_for(const DgpSpec& spec);

// True value the estimators target (theta0; ATET for the confounded design).
double true_parameter(const DgpSpec& spec);

struct EstimatorBlock {
  std::string label;
  std::string estimator = "plm";  // "plm" or "atet"
  DdmlConfig ddml;
};

struct MonteCarloOptions {
  int reps = 100;
  std::uint64_t seed = 0;
  // Bias is measured against this value when set; for bootstrap designs
  // without it, against each variant's own full-sample estimate.
  std::optional<double> reference;
};

struct WeightSummary {
  Target target = Target::ell;
  int column = 0;
  VectorXd mean_weights;
};

struct MspeSummary {
  Target target = Target::ell;
  int column = 0;
  std::vector<std::string> learners;
  VectorXd mean_mspe;
};

struct EstimatorMetrics {
  std::string name;  // block label / variant
  std::string block;
  std::string variant;
  double reference = 0.0;
  std::size_t completed = 0;
  std::size_t failures = 0;
  double mean_bias = 0.0;
  double se_bias = 0.0;
  double mab = 0.0;
  double coverage = 0.0;
  double mean_se = 0.0;
  std::vector<double> theta;  // per completed repetition
  std::vector<WeightSummary> weights;
  std::vector<MspeSummary> mspe;
  std::vector<std::string> errors;  // distinct failure messages
};

struct SimulationReport {
  DgpSpec dgp;
  int reps = 0;
  std::uint64_t seed = 0;
  std::vector<EstimatorMetrics> estimators;
  std::vector<double> block_seconds;  // summed over repetitions, per block
  double wall_seconds = 0.0;

  const EstimatorMetrics& row(const std::string& name) const;
};

// Repetitions run in parallel; each draws its data from its own stream
// and results are reduced in repetition order.
SimulationReport run_monte_carlo(const DgpSpec& dgp, const std::vector<EstimatorBlock>& blocks,
                                 const MonteCarloOptions& options);

namespace reference {
SimulationReport run_monte_carlo(const DgpSpec& dgp, const std::vector<EstimatorBlock>& blocks,
                                 const MonteCarloOptions& options);
}  // namespace reference

}  // namespace ddml
