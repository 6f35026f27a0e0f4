#include "ddml/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <random>

#include <Eigen/Cholesky>

#include "ddml/error.hpp"
#include "ddml/penalized.hpp"
#include "ddml/rng.hpp"

namespace ddml {

std::string to_string(DgpKind kind) {
  switch (kind) {
    case DgpKind::toy_linear: return "toy_linear";
    case DgpKind::toy_nonlinear: return "toy_nonlinear";
    case DgpKind::calibrated: return "calibrated";
    case DgpKind::atet_confounded: return "atet_confounded";
    case DgpKind::bootstrap: return "bootstrap";
  }
  return "?";
}

DgpKind dgp_kind_from_string(const std::string& s) {
  for (auto k : {DgpKind::toy_linear, DgpKind::toy_nonlinear, DgpKind::calibrated, DgpKind::atet_confounded,
                 DgpKind::bootstrap})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown dgp kind '" + s + "'");
}

std::string to_string(CalibrationEngine engine) {
  return engine == CalibrationEngine::linear ? "linear" : "gradient_boosting";
}

CalibrationEngine calibration_engine_from_string(const std::string& s) {
  if (s == "linear") return CalibrationEngine::linear;
  if (s == "gradient_boosting") return CalibrationEngine::gradient_boosting;
  throw ConfigError("unknown calibration engine '" + s + "'");
}

const EstimatorMetrics& SimulationReport::row(const std::string& name) const {
  for (const auto& e : estimators)
    if (e.name == name) return e;
  throw ContractError("no estimator row named '" + name + "'");
}

namespace {

constexpr std::uint64_t kCalibrationSeed = 0xca11b;
constexpr std::size_t kCalibrationDraws = 50000;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double variance(const VectorXd& v) {
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size());
}

// Bisection for an increasing f on [lo, hi] with f(lo) < target < f(hi).
template <class F>
double bisect(F f, double lo, double hi, double target) {
  for (int it = 0; it < 200 && hi - lo > 1e-12 * (1.0 + std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

VectorXd toy_g_column(const DgpSpec& spec, const MatrixXd& x) {
  VectorXd g(x.rows());
  std::vector<double> row(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) row[j] = x(i, j);
    g[i] = toy_g(spec, row);
  }
  return g;
}

// confounded ATET design
double atet_index(std::span<const double> x) { return 0.5 * x[0] - 0.25 * x[1] - 0.35; }
double atet_g0(std::span<const double> x) { return x[0] + 0.5 * x[1] * x[1] + 0.25 * x[2]; }
double atet_m0(std::span<const double> x) { return normal_cdf(atet_index(x)); }

void check_dims(const DgpSpec& spec, int needed) {
  if (spec.dim < needed)
    throw ConfigError(to_string(spec.kind) + " design needs dim >= " + std::to_string(needed));
}

Dataset finish(VectorXd y, VectorXd d, MatrixXd x) {
  MatrixXd dm(d.size(), 1);
  dm.col(0) = d;
  return make_dataset(std::move(y), std::move(dm), std::move(x));
}

}  // namespace

double toy_g(const DgpSpec& spec, std::span<const double> x) {
  if (spec.kind == DgpKind::toy_linear) {
    double g = 0.0, w = 0.9;
    for (double v : x) {
      g += w * v;
      w *= 0.9;
    }
    return g;
  }
  // X1X2 + X3^2 + X4X5 + X6X7 + X8X9 + X10 + X11^2 + X12X13 (1-based)
  const double fifth = spec.literal_g ? x[4] * x[4] : x[3] * x[4];
  return x[0] * x[1] + x[2] * x[2] + fifth + x[5] * x[6] + x[7] * x[8] + x[9] + x[10] * x[10] + x[11] * x[12];
}

MatrixXd draw_correlated_normals(std::size_t n, int dim, double rho, Rng& rng) {
  MatrixXd sigma(dim, dim);
  for (int j = 0; j < dim; ++j)
    for (int k = 0; k < dim; ++k) sigma(j, k) = std::pow(rho, std::abs(j - k));
  const Eigen::LLT<MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw ConfigError("covariance with this rho is not positive definite");
  const MatrixXd lower = llt.matrixL();
  std::normal_distribution<double> z;
  MatrixXd raw(n, dim);
  for (std::size_t i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) raw(static_cast<Eigen::Index>(i), j) = z(rng);
  return raw * lower.transpose();
}

DgpSpec calibrate_toy(DgpSpec spec) {
  if (spec.kind != DgpKind::toy_linear && spec.kind != DgpKind::toy_nonlinear)
    throw ContractError("calibrate_toy needs a toy design");
  if (spec.kind == DgpKind::toy_nonlinear) check_dims(spec, 13);
  if (!(spec.r2_target > 0.0 && spec.r2_target < 1.0)) throw ConfigError("r2_target must lie in (0, 1)");
  auto rng = make_rng(kCalibrationSeed, {static_cast<std::uint64_t>(spec.kind), static_cast<std::uint64_t>(spec.dim)});
  const MatrixXd x = draw_correlated_normals(kCalibrationDraws, spec.dim, spec.rho, rng);
  std::normal_distribution<double> z;
  VectorXd eps(kCalibrationDraws), u(kCalibrationDraws);
  for (std::size_t i = 0; i < kCalibrationDraws; ++i) {
    eps[static_cast<Eigen::Index>(i)] = z(rng);
    u[static_cast<Eigen::Index>(i)] = z(rng);
  }
  const VectorXd g = toy_g_column(spec, x);
  const double target = spec.r2_target;

  // R^2 of D on X: share of Var(D) explained by E[D|X] = c_d g
  auto r2_d = [&](double c) { return 1.0 - variance(u) / variance(c * g + u); };
  double hi = 1.0;
  while (r2_d(hi) < target) hi *= 2.0;
  spec.c_d = bisect(r2_d, 0.0, hi, target);

  const VectorXd noise_y = spec.theta0 * u + eps;
  auto r2_y = [&](double c) {
    const VectorXd y = (spec.theta0 * spec.c_d + c) * g + noise_y;
    return 1.0 - variance(noise_y) / variance(y);
  };
  const double lo = -spec.theta0 * spec.c_d;  // E[Y|X] vanishes here
  hi = std::max(1.0, lo + 1.0);
  while (r2_y(hi) < target) hi = lo + 2.0 * (hi - lo);
  spec.c_y = bisect(r2_y, lo, hi, target);
  spec.calibrated_scales = true;
  return spec;
}

Dataset generate_toy(const DgpSpec& spec, std::uint64_t seed) {
  if (spec.kind == DgpKind::toy_nonlinear) check_dims(spec, 13);
  if (spec.n < 2) throw ConfigError("n must be at least 2");
  auto rng = make_rng(seed, {0x70e});
  MatrixXd x = draw_correlated_normals(spec.n, spec.dim, spec.rho, rng);
  const VectorXd g = toy_g_column(spec, x);
  std::normal_distribution<double> z;
  VectorXd y(spec.n), d(spec.n);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(spec.n); ++i) {
    const double eps = z(rng), u = z(rng);
    d[i] = spec.c_d * g[i] + u;
    y[i] = spec.theta0 * d[i] + spec.c_y * g[i] + eps;
  }
  return finish(std::move(y), std::move(d), std::move(x));
}

Dataset generate_atet(const DgpSpec& spec, std::uint64_t seed) {
  check_dims(spec, 3);
  if (spec.n < 2) throw ConfigError("n must be at least 2");
  auto rng = make_rng(seed, {0xa7e7});
  MatrixXd x = draw_correlated_normals(spec.n, spec.dim, spec.rho, rng);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  VectorXd y(spec.n), d(spec.n);
  std::vector<double> row(spec.dim);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(spec.n); ++i) {
    for (int j = 0; j < spec.dim; ++j) row[j] = x(i, j);
    d[i] = unif(rng) < atet_m0(row) ? 1.0 : 0.0;
    y[i] = atet_g0(row) + spec.theta0 * d[i] + z(rng);
  }
  return finish(std::move(y), std::move(d), std::move(x));
}

Dataset generate_calibrated(const DgpSpec& spec, std::size_t n_b, std::uint64_t seed) {
  if (!spec.model) throw ConfigError("calibrated design has no fitted generative model");
  if (n_b < 2) throw ConfigError("n must be at least 2");
  const auto& gm = *spec.model;
  auto rng = make_rng(seed, {0xca1});
  std::uniform_int_distribution<Eigen::Index> pick(0, gm.x.rows() - 1);
  std::normal_distribution<double> nu(0.0, spec.kappa1), eps(0.0, spec.kappa2);
  MatrixXd x(n_b, gm.x.cols());
  VectorXd y(n_b), d(n_b);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n_b); ++i) {
    const Eigen::Index r = pick(rng);
    x.row(i) = gm.x.row(r);
    d[i] = gm.h_values[r] + nu(rng) >= 0.5 ? 1.0 : 0.0;
    y[i] = spec.theta0 * d[i] + gm.g_values[r] + eps(rng);
  }
  return finish(std::move(y), std::move(d), std::move(x));
}

Dataset generate_bootstrap(const DgpSpec& spec, std::size_t n_b, std::uint64_t seed) {
  if (!spec.source) throw ConfigError("bootstrap design has no source dataset");
  if (n_b < 2) throw ConfigError("n must be at least 2");
  auto rng = make_rng(seed, {0xb007});
  std::uniform_int_distribution<int> pick(0, static_cast<int>(spec.source->rows()) - 1);
  std::vector<int> rows(n_b);
  for (auto& r : rows) r = pick(rng);
  return take_rows(*spec.source, rows);
}

Dataset generate(const DgpSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case DgpKind::toy_linear:
    case DgpKind::toy_nonlinear: return generate_toy(spec, seed);
    case DgpKind::atet_confounded: return generate_atet(spec, seed);
    case DgpKind::calibrated: return generate_calibrated(spec, spec.n, seed);
    case DgpKind::bootstrap: return generate_bootstrap(spec, spec.n, seed);
  }
  throw ContractError("unhandled dgp kind");
}

double theta_ols(const Dataset& data) {
  MatrixXd design(data.rows(), 1 + data.x.cols());
  design.col(0) = data.d.col(0);
  design.rightCols(data.x.cols()) = data.x;
  const auto fit = linear::ols(design, data.y);
  if (fit.rank_deficient) throw NumericalError("OLS design is rank deficient; coefficient on d not identified");
  return fit.coef[0];
}

DgpSpec calibrate_generative(const Dataset& data, CalibrationEngine engine) {
  if (data.treatment_count() != 1 || !is_binary(data.d.col(0))) throw ConfigError("treatment not binary");
  auto gm = std::make_shared<GenerativeModel>();
  gm->engine = engine;
  gm->x = data.x;
  gm->theta_ols = theta_ols(data);
  const VectorXd partial = data.y - gm->theta_ols * data.d.col(0);
  LearnerSpec learner;
  learner.kind = engine == CalibrationEngine::linear ? LearnerKind::ols : LearnerKind::gradient_boosting;
  gm->g_tilde = std::make_shared<FittedLearner>(fit(learner, data.x, partial, 0x9));
  gm->h_tilde = std::make_shared<FittedLearner>(fit(learner, data.x, data.d.col(0), 0x4));
  gm->g_values = gm->g_tilde->predict(data.x);
  gm->h_values = gm->h_tilde->predict(data.x);

  DgpSpec spec;
  spec.kind = DgpKind::calibrated;
  spec.n = data.rows();
  spec.theta0 = 6000.0;
  spec.kappa1 = 0.35;
  spec.kappa2 = engine == CalibrationEngine::linear ? 55500.0 : 54000.0;
  spec.dim = static_cast<int>(data.x.cols());
  spec.model = std::move(gm);
  return spec;
}

LearnerSpec oracle_for(const DgpSpec& spec) {
  LearnerSpec s;
  s.kind = LearnerKind::oracle;
  s.name = "oracle";
  switch (spec.kind) {
    case DgpKind::toy_linear:
    case DgpKind::toy_nonlinear: {
      const double ell = spec.theta0 * spec.c_d + spec.c_y, m = spec.c_d;
      s.truth_by_target[Target::ell] = [spec, ell](std::span<const double> x) { return ell * toy_g(spec, x); };
      s.truth_by_target[Target::m] = [spec, m](std::span<const double> x) { return m * toy_g(spec, x); };
      break;
    }
    case DgpKind::atet_confounded:
      s.truth_by_target[Target::g0] = atet_g0;
      s.truth_by_target[Target::m] = atet_m0;
      break;
    case DgpKind::calibrated: {
      if (!spec.model) throw ConfigError("calibrated design has no fitted generative model");
      auto gm = spec.model;
      const double k1 = spec.kappa1, theta0 = spec.theta0;
      auto eval = [](const FittedLearner& f, std::span<const double> x) {
        MatrixXd row(1, static_cast<Eigen::Index>(x.size()));
        for (std::size_t j = 0; j < x.size(); ++j) row(0, static_cast<Eigen::Index>(j)) = x[j];
        return f.predict(row)[0];
      };
      auto m0 = [gm, k1, eval](std::span<const double> x) {
        const double h = eval(*gm->h_tilde, x);
        if (k1 <= 0.0) return h >= 0.5 ? 1.0 : 0.0;
        return normal_cdf((h - 0.5) / k1);
      };
      s.truth_by_target[Target::m] = m0;
      s.truth_by_target[Target::g0] = [gm, eval](std::span<const double> x) { return eval(*gm->g_tilde, x); };
      s.truth_by_target[Target::ell] = [gm, m0, theta0, eval](std::span<const double> x) {
        return theta0 * m0(x) + eval(*gm->g_tilde, x);
      };
      break;
    }
    case DgpKind::bootstrap: throw ConfigError("the bootstrap design has no known nuisance functions");
  }
  return s;
}

double true_parameter(const DgpSpec& spec) { return spec.theta0; }

namespace {

struct BlockOutcome {
  std::optional<DdmlResult> result;
  std::string error;
  double seconds = 0.0;
};

using RepOutcome = std::vector<BlockOutcome>;

DdmlResult run_block(const EstimatorBlock& block, const Dataset& data, std::uint64_t seed) {
  if (block.estimator == "plm") return run_plm(data, block.ddml, seed);
  if (block.estimator == "atet") return run_atet(data, block.ddml, seed);
  throw ConfigError("unknown estimator '" + block.estimator + "'");
}

RepOutcome run_rep(const DgpSpec& dgp, const std::vector<EstimatorBlock>& blocks, std::uint64_t seed, int r) {
  const Dataset data = generate(dgp, derive_seed(seed, {static_cast<std::uint64_t>(r), 0xda7a}));
  RepOutcome out(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      out[b].result = run_block(blocks[b], data, derive_seed(seed, {static_cast<std::uint64_t>(r), b, 0xe57}));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      out[b].error = e.what();
    }
    out[b].seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return out;
}

void accumulate(VectorXd& sum, const VectorXd& v) {
  if (sum.size() == 0) sum = VectorXd::Zero(v.size());
  sum += v;
}

EstimatorMetrics reduce(const std::vector<RepOutcome>& reps, std::size_t b, const EstimatorBlock& block,
                        const std::string& variant, std::size_t vi, double ref) {
  EstimatorMetrics m;
  m.block = block.label;
  m.variant = variant;
  m.name = block.label.empty() ? variant : block.label + ":" + variant;
  m.reference = ref;
  std::vector<double> abs_bias;
  std::size_t covered = 0;
  double se_sum = 0.0;
  std::vector<VectorXd> w_sum;
  std::vector<std::size_t> w_count;
  std::vector<VectorXd> mspe_sum;
  for (const auto& rep : reps) {
    const auto& o = rep[b];
    if (!o.result) {
      ++m.failures;
      if (std::find(m.errors.begin(), m.errors.end(), o.error) == m.errors.end()) m.errors.push_back(o.error);
      continue;
    }
    const auto& res = *o.result;
    const auto& v = res.variants[vi];
    const auto& agg = v.estimates.aggregate;
    m.theta.push_back(agg.theta[0]);
    abs_bias.push_back(std::abs(agg.theta[0] - ref));
    se_sum += agg.se[0];
    if (agg.ci_low[0] <= ref && ref <= agg.ci_high[0]) ++covered;

    // weights: average over the run's repetitions, then over Monte Carlo reps
    for (const auto& per_rep : v.weights) {
      if (w_sum.size() < per_rep.size()) {
        w_sum.resize(per_rep.size());
        w_count.resize(per_rep.size(), 0);
        m.weights.resize(per_rep.size());
      }
      for (std::size_t t = 0; t < per_rep.size(); ++t) {
        accumulate(w_sum[t], per_rep[t].weights.colwise().mean().transpose());
        ++w_count[t];
        m.weights[t].target = per_rep[t].target;
        m.weights[t].column = per_rep[t].column;
      }
    }
    for (const auto& info : res.repetitions) {
      if (mspe_sum.size() < info.targets.size()) {
        mspe_sum.resize(info.targets.size());
        m.mspe.resize(info.targets.size());
      }
      for (std::size_t t = 0; t < info.targets.size(); ++t) {
        accumulate(mspe_sum[t], info.targets[t].mspe / static_cast<double>(res.repetitions.size()));
        m.mspe[t].target = info.targets[t].target;
        m.mspe[t].column = info.targets[t].column;
        m.mspe[t].learners = info.targets[t].learners;
      }
    }
  }
  m.completed = m.theta.size();
  if (m.completed == 0) return m;
  const double c = static_cast<double>(m.completed);
  double sum = 0.0;
  for (double t : m.theta) sum += t - ref;
  m.mean_bias = sum / c;
  if (m.completed > 1) {
    double ss = 0.0;
    for (double t : m.theta) ss += (t - ref - m.mean_bias) * (t - ref - m.mean_bias);
    m.se_bias = std::sqrt(ss / (c - 1.0)) / std::sqrt(c);
  }
  m.mab = median(abs_bias);
  m.coverage = static_cast<double>(covered) / c;
  m.mean_se = se_sum / c;
  for (std::size_t t = 0; t < w_sum.size(); ++t) m.weights[t].mean_weights = w_sum[t] / static_cast<double>(w_count[t]);
  for (std::size_t t = 0; t < mspe_sum.size(); ++t) m.mspe[t].mean_mspe = mspe_sum[t] / c;
  return m;
}

SimulationReport run_impl(const DgpSpec& dgp_in, const std::vector<EstimatorBlock>& blocks,
                          const MonteCarloOptions& options, bool parallel) {
  if (options.reps < 1) throw ConfigError("reps must be at least 1");
  if (blocks.empty()) throw ConfigError("no estimators configured");
  for (const auto& b : blocks) b.ddml.validate();
  const auto wall0 = std::chrono::steady_clock::now();
  DgpSpec dgp = dgp_in;
  if ((dgp.kind == DgpKind::toy_linear || dgp.kind == DgpKind::toy_nonlinear) && !dgp.calibrated_scales)
    dgp = calibrate_toy(dgp);

  // reference values per block and variant
  std::vector<std::vector<double>> refs(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto names = variant_names(blocks[b].ddml);
    if (options.reference) {
      refs[b].assign(names.size(), *options.reference);
    } else if (dgp.kind == DgpKind::bootstrap) {
      if (!dgp.source) throw ConfigError("bootstrap design has no source dataset");
      const auto full = run_block(blocks[b], *dgp.source, derive_seed(options.seed, {b, 0xf5}));
      for (const auto& v : full.variants) refs[b].push_back(v.estimates.aggregate.theta[0]);
    } else {
      refs[b].assign(names.size(), true_parameter(dgp));
    }
  }

  std::vector<RepOutcome> reps(options.reps);
  std::vector<std::exception_ptr> errors(options.reps);
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (int r = 0; r < options.reps; ++r) {
    try {
      reps[r] = run_rep(dgp, blocks, options.seed, r);
    } catch (...) {
      errors[r] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  SimulationReport report;
  report.dgp = dgp;
  report.reps = options.reps;
  report.seed = options.seed;
  report.block_seconds.assign(blocks.size(), 0.0);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (const auto& rep : reps) report.block_seconds[b] += rep[b].seconds;
    const auto names = variant_names(blocks[b].ddml);
    for (std::size_t vi = 0; vi < names.size(); ++vi)
      report.estimators.push_back(reduce(reps, b, blocks[b], names[vi], vi, refs[b][vi]));
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return report;
}

}  // namespace

SimulationReport run_monte_carlo(const DgpSpec& dgp, const std::vector<EstimatorBlock>& blocks,
                                 const MonteCarloOptions& options) {
  return run_impl(dgp, blocks, options, true);
}

namespace reference {
SimulationReport run_monte_carlo(const DgpSpec& dgp, const std::vector<EstimatorBlock>& blocks,
                                 const MonteCarloOptions& options) {
  return run_impl(dgp, blocks, options, false);
}
}  // namespace reference

}  // namespace ddml
