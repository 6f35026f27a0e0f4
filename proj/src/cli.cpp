#include "ddml/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <omp.h>

#include "ddml/config.hpp"
#include "ddml/report.hpp"

namespace ddml {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::numerical:
    case ErrorKind::shape: return 4;
    case ErrorKind::contract: return 1;
  }
  return 1;
}

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
  std::optional<std::string> format;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration")->required();
  cmd->add_option("--seed", f.seed, "master seed (overrides the config)");
  cmd->add_option("--threads", f.threads, "worker threads; results do not depend on it");
  cmd->add_option("--out", f.out, "output directory (overrides the config)");
  cmd->add_option("--format", f.format, "json, csv or both");
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig c = load_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.out) c.out_dir = *f.out;
  if (f.format) c.format = output_format_from_string(*f.format);
  if (f.threads) {
    if (*f.threads < 1) throw ConfigError("--threads must be at least 1");
    omp_set_num_threads(*f.threads);
  }
  return c;
}

bool wants_json(OutputFormat f) { return f != OutputFormat::csv; }
bool wants_csv(OutputFormat f) { return f != OutputFormat::json; }

void reject_oracles(const RunConfig& c) {
  for (const auto& b : c.estimators)
    for (const auto* list : {&b.ddml.learners, &b.ddml.treatment_learners})
      for (const auto& l : *list)
        if (l.kind == LearnerKind::oracle) throw ConfigError("oracle learners need a simulated design (use simulate)");
}

void emit(const RunConfig& c, const std::vector<OutputFile>& files) {
  write_outputs(c.out_dir, files);
  for (const auto& f : files) std::cerr << "wrote " << (std::filesystem::path(c.out_dir) / f.name).string() << "\n";
}

int cmd_estimate(const CommonFlags& flags, const std::string& estimator) {
  RunConfig c = resolve(flags);
  if (!c.data) throw ConfigError("config has no data block");
  if (c.estimators.size() != 1) throw ConfigError("estimate commands take exactly one estimator block");
  c.estimators[0].estimator = estimator;
  reject_oracles(c);
  const Dataset data = load_csv(c.data->path, c.data->columns);
  if (data.dropped_rows > 0) std::cerr << "dropped " << data.dropped_rows << " rows with missing values\n";
  std::cerr << estimator << ": n = " << data.rows() << ", " << c.estimators[0].ddml.learners.size()
            << " learner(s)\n";
  const auto t0 = std::chrono::steady_clock::now();
  const DdmlResult result = estimator == "plm" ? run_plm(data, c.estimators[0].ddml, c.seed)
                                               : run_atet(data, c.estimators[0].ddml, c.seed);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::vector<OutputFile> files;
  if (wants_json(c.format)) files.push_back({"report.json", dump(estimate_report(c, data, result, secs))});
  if (wants_csv(c.format)) {
    files.push_back({"estimates.csv", estimates_csv(result)});
    files.push_back({"weights.csv", weights_csv(result)});
  }
  files.push_back({"summary.txt", estimates_table(result)});
  emit(c, files);
  return 0;
}

void keep_learners(RunConfig& c, const std::vector<std::string>& keep) {
  auto filter = [&](std::vector<LearnerSpec>& list) {
    std::vector<LearnerSpec> out;
    for (auto& l : list)
      if (std::find(keep.begin(), keep.end(), l.display_name()) != keep.end()) out.push_back(std::move(l));
    list = std::move(out);
  };
  for (auto& b : c.estimators) {
    filter(b.ddml.learners);
    if (!b.ddml.treatment_learners.empty()) filter(b.ddml.treatment_learners);
    b.ddml.validate();
  }
}

int cmd_simulate(const CommonFlags& flags, std::optional<int> reps, const std::vector<std::string>& keep) {
  RunConfig c = resolve(flags);
  if (!c.dgp) throw ConfigError("config has no dgp block");
  if (reps) {
    if (*reps < 1) throw ConfigError("--reps must be at least 1");
    c.reps = *reps;
  }
  if (!keep.empty()) keep_learners(c, keep);
  DgpSpec spec = c.dgp->spec;
  if (spec.kind == DgpKind::calibrated) {
    const Dataset source = load_csv(c.dgp->source->path, c.dgp->source->columns);
    DgpSpec fitted = calibrate_generative(source, c.dgp->engine);
    fitted.n = spec.n;
    fitted.theta0 = spec.theta0;
    fitted.kappa1 = spec.kappa1;
    fitted.kappa2 = spec.kappa2;
    spec = fitted;
    std::cerr << "calibrated on " << source.rows() << " rows, theta_OLS = " << spec.model->theta_ols << "\n";
  } else if (spec.kind == DgpKind::bootstrap) {
    spec.source = std::make_shared<const Dataset>(load_csv(c.dgp->source->path, c.dgp->source->columns));
  } else if ((spec.kind == DgpKind::toy_linear || spec.kind == DgpKind::toy_nonlinear) && !spec.calibrated_scales) {
    spec = calibrate_toy(spec);
  }
  for (auto& b : c.estimators)
    for (auto* list : {&b.ddml.learners, &b.ddml.treatment_learners})
      for (auto& l : *list)
        if (l.kind == LearnerKind::oracle) {
          const auto name = l.name;
          l = oracle_for(spec);
          if (!name.empty()) l.name = name;
        }
  std::cerr << "simulate: " << to_string(spec.kind) << ", n = " << spec.n << ", " << c.reps << " reps\n";
  MonteCarloOptions opt;
  opt.reps = c.reps;
  opt.seed = c.seed;
  opt.reference = c.reference;
  const SimulationReport report = run_monte_carlo(spec, c.estimators, opt);
  std::vector<OutputFile> files;
  if (wants_json(c.format)) files.push_back({"simulation.json", dump(simulation_report(c, report))});
  if (wants_csv(c.format)) {
    files.push_back({"simulation.csv", simulation_csv(report)});
    files.push_back({"simulation_weights.csv", simulation_weights_csv(report)});
  }
  files.push_back({"summary.txt", simulation_table(report)});
  emit(c, files);
  return 0;
}

int cmd_weights(const std::string& path, const std::optional<std::string>& out, const std::string& format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  Json report;
  try {
    report = Json::parse(buf.str());
  } catch (const nlohmann::json::parse_error&) {
    throw DataError("report '" + path + "' is not valid JSON");
  }
  if (format != "table" && format != "csv") throw ConfigError("weights --format must be table or csv");
  const std::string text = format == "csv" ? weights_table_csv(report) : weights_table(report);
  if (out) {
    write_outputs(*out, {{format == "csv" ? "weights_table.csv" : "weights_table.txt", text}});
  } else {
    std::cout << text;
  }
  return 0;
}

std::string one_line(std::string s) {
  for (char& ch : s)
    if (ch == '\n' || ch == '\r') ch = ' ';
  return s;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Double/debiased machine learning with stacking"};
  app.require_subcommand(1);
  CommonFlags plm_flags, atet_flags, sim_flags;
  auto* plm = app.add_subcommand("estimate-plm", "partially linear model");
  add_common(plm, plm_flags);
  auto* atet = app.add_subcommand("estimate-atet", "average treatment effect on the treated");
  add_common(atet, atet_flags);
  auto* sim = app.add_subcommand("simulate", "Monte Carlo study");
  add_common(sim, sim_flags);
  std::optional<int> reps;
  std::vector<std::string> keep;
  sim->add_option("--reps", reps, "number of replications (overrides the config)");
  sim->add_option("--learners", keep, "keep only these learners (by name)")->delimiter(',');
  auto* weights = app.add_subcommand("weights", "print stacking weights from a saved report");
  std::string report_path, weights_format = "table";
  std::optional<std::string> weights_out;
  weights->add_option("--report", report_path, "report JSON")->required();
  weights->add_option("--format", weights_format, "table or csv");
  weights->add_option("--out", weights_out, "write to this directory instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: config: " << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    if (plm->parsed()) return cmd_estimate(plm_flags, "plm");
    if (atet->parsed()) return cmd_estimate(atet_flags, "atet");
    if (sim->parsed()) return cmd_simulate(sim_flags, reps, keep);
    if (weights->parsed()) return cmd_weights(report_path, weights_out, weights_format);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << one_line(e.what()) << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 1;
}

}  // namespace ddml
