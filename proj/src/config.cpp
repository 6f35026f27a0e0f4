#include "ddml/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "ddml/error.hpp"

namespace ddml {

std::string to_string(OutputFormat f) {
  switch (f) {
    case OutputFormat::json: return "json";
    case OutputFormat::csv: return "csv";
    case OutputFormat::both: return "both";
  }
  return "?";
}

OutputFormat output_format_from_string(const std::string& s) {
  if (s == "json") return OutputFormat::json;
  if (s == "csv") return OutputFormat::csv;
  if (s == "both") return OutputFormat::both;
  throw ConfigError("unknown output format '" + s + "' (json, csv, both)");
}

namespace {

void expect_object(const Json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
}

// typo guard: every key must be known
void allow_keys(const Json& j, const std::string& where, std::initializer_list<const char*> keys) {
  expect_object(j, where);
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : keys) ok = ok || k == a;
    if (!ok) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

template <class T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("bad value for '" + std::string(key) + "' in " + where);
  }
}

StepKind step_kind_from_string(const std::string& s) {
  for (auto k : {StepKind::standardize, StepKind::polynomial, StepKind::two_way_interactions, StepKind::spline})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown transform '" + s + "'");
}

TransformStep parse_step(const Json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "poly2_interactions") return TransformStep::poly2_interactions();
    TransformStep t;
    t.kind = step_kind_from_string(s);
    return t;
  }
  allow_keys(j, "transform step", {"kind", "order", "interactions", "knots", "degree", "interact"});
  std::string kind;
  read(j, "kind", kind, "transform step");
  TransformStep t;
  t.kind = step_kind_from_string(kind);
  read(j, "order", t.order, "transform step");
  read(j, "interactions", t.interactions, "transform step");
  read(j, "knots", t.knots, "transform step");
  read(j, "degree", t.degree, "transform step");
  read(j, "interact", t.interact, "transform step");
  return t;
}

Json step_json(const TransformStep& t) {
  Json j;
  j["kind"] = to_string(t.kind);
  if (t.kind == StepKind::polynomial) {
    j["order"] = t.order;
    j["interactions"] = t.interactions;
  } else if (t.kind == StepKind::spline) {
    j["knots"] = t.knots;
    j["degree"] = t.degree;
    j["interact"] = t.interact;
  }
  return j;
}

DataSource parse_data(const Json& j) {
  allow_keys(j, "data", {"path", "outcome", "treatments", "treatment", "covariates"});
  DataSource ds;
  read(j, "path", ds.path, "data");
  read(j, "outcome", ds.columns.outcome, "data");
  if (j.contains("treatment")) {
    std::string t;
    read(j, "treatment", t, "data");
    ds.columns.treatments = {t};
  }
  read(j, "treatments", ds.columns.treatments, "data");
  if (j.contains("covariates")) {
    read(j, "covariates", ds.columns.covariates, "data");
    ds.columns.use_rest = false;
  }
  if (ds.path.empty()) throw ConfigError("data.path is required");
  if (ds.columns.outcome.empty()) throw ConfigError("data.outcome is required");
  if (ds.columns.treatments.empty()) throw ConfigError("data.treatments is required");
  return ds;
}

Json data_json(const DataSource& ds) {
  Json j;
  j["path"] = ds.path;
  j["outcome"] = ds.columns.outcome;
  j["treatments"] = ds.columns.treatments;
  if (ds.columns.use_rest)
    j["covariates"] = "all remaining columns";
  else
    j["covariates"] = ds.columns.covariates;
  return j;
}

DgpConfig parse_dgp(const Json& j) {
  allow_keys(j, "dgp", {"kind", "n", "theta0", "dim", "rho", "c_y", "c_d", "literal_g", "r2_target", "kappa1",
                        "kappa2", "engine", "source"});
  DgpConfig c;
  std::string kind;
  read(j, "kind", kind, "dgp");
  if (kind.empty()) throw ConfigError("dgp.kind is required");
  c.spec.kind = dgp_kind_from_string(kind);
  if (c.spec.kind == DgpKind::calibrated) c.spec.theta0 = 6000.0;
  read(j, "n", c.spec.n, "dgp");
  read(j, "theta0", c.spec.theta0, "dgp");
  read(j, "dim", c.spec.dim, "dgp");
  read(j, "rho", c.spec.rho, "dgp");
  read(j, "literal_g", c.spec.literal_g, "dgp");
  read(j, "r2_target", c.spec.r2_target, "dgp");
  if (j.contains("c_y") != j.contains("c_d")) throw ConfigError("give both dgp.c_y and dgp.c_d or neither");
  if (j.contains("c_y")) {
    read(j, "c_y", c.spec.c_y, "dgp");
    read(j, "c_d", c.spec.c_d, "dgp");
    c.spec.calibrated_scales = true;
    c.fixed_scales = true;
  }
  if (j.contains("engine")) {
    std::string e;
    read(j, "engine", e, "dgp");
    c.engine = calibration_engine_from_string(e);
  }
  c.spec.kappa2 = c.engine == CalibrationEngine::linear ? 55500.0 : 54000.0;
  read(j, "kappa1", c.spec.kappa1, "dgp");
  read(j, "kappa2", c.spec.kappa2, "dgp");
  if (j.contains("source")) c.source = parse_data(j.at("source"));
  if ((c.spec.kind == DgpKind::calibrated || c.spec.kind == DgpKind::bootstrap) && !c.source)
    throw ConfigError("dgp.source is required for the " + kind + " design");
  if (c.spec.n < 2) throw ConfigError("dgp.n must be at least 2");
  if (c.spec.dim < 1) throw ConfigError("dgp.dim must be positive");
  if (!(c.spec.rho > -1.0 && c.spec.rho < 1.0)) throw ConfigError("dgp.rho must lie in (-1, 1)");
  if (c.spec.kappa1 < 0.0 || c.spec.kappa2 < 0.0) throw ConfigError("dgp noise scales must be non-negative");
  return c;
}

std::vector<LearnerSpec> parse_learners(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + " must be an array");
  std::vector<LearnerSpec> out;
  for (const auto& l : j) out.push_back(parse_learner(l));
  return out;
}

std::vector<StackingVariant> parse_stacking(const Json& j) {
  std::vector<StackingVariant> out;
  auto one = [](const Json& s) {
    StackingVariant v;
    if (s.is_string()) {
      v.mode = stacking_mode_from_string(s.get<std::string>());
      return v;
    }
    allow_keys(s, "stacking entry", {"mode", "final"});
    std::string mode = "short", final = "cls";
    read(s, "mode", mode, "stacking entry");
    read(s, "final", final, "stacking entry");
    v.mode = stacking_mode_from_string(mode);
    v.final = final_learner_from_string(final);
    return v;
  };
  if (j.is_array())
    for (const auto& s : j) out.push_back(one(s));
  else
    out.push_back(one(j));
  return out;
}

EstimatorBlock parse_block(const Json& j) {
  EstimatorBlock b;
  Json rest = j;
  if (rest.is_object()) {
    if (rest.contains("label")) {
      read(rest, "label", b.label, "estimator");
      rest.erase("label");
    }
    if (rest.contains("estimator")) {
      read(rest, "estimator", b.estimator, "estimator");
      rest.erase("estimator");
    }
  }
  if (b.estimator != "plm" && b.estimator != "atet") throw ConfigError("estimator must be 'plm' or 'atet'");
  b.ddml = parse_estimator(rest);
  return b;
}

}  // namespace

LearnerSpec parse_learner(const Json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "oracle") {
      LearnerSpec o;
      o.kind = LearnerKind::oracle;
      o.name = "oracle";
      return o;
    }
    return preset_learner(s);
  }
  allow_keys(j, "learner", {"preset", "kind", "name", "seed_stream", "penalty", "forest", "boosting", "transform"});
  LearnerSpec s;
  if (j.contains("preset")) {
    std::string p;
    read(j, "preset", p, "learner");
    s = preset_learner(p);
  } else if (j.contains("kind")) {
    std::string k;
    read(j, "kind", k, "learner");
    s.kind = learner_kind_from_string(k);
  } else {
    throw ConfigError("learner needs 'preset' or 'kind'");
  }
  if (j.contains("preset") && j.contains("kind")) {
    std::string k;
    read(j, "kind", k, "learner");
    if (learner_kind_from_string(k) != s.kind) throw ConfigError("learner 'kind' contradicts its preset");
  }
  read(j, "name", s.name, "learner");
  read(j, "seed_stream", s.seed_stream, "learner");
  if (j.contains("penalty")) {
    const auto& p = j.at("penalty");
    allow_keys(p, "penalty", {"cv_folds", "grid_points", "grid_ratio", "tolerance", "lambda"});
    read(p, "cv_folds", s.penalty.cv_folds, "penalty");
    read(p, "grid_points", s.penalty.grid_points, "penalty");
    read(p, "grid_ratio", s.penalty.grid_ratio, "penalty");
    read(p, "tolerance", s.penalty.tolerance, "penalty");
    if (p.contains("lambda")) {
      double l = 0.0;
      read(p, "lambda", l, "penalty");
      s.penalty.lambda = l;
    }
  }
  if (j.contains("forest")) {
    const auto& f = j.at("forest");
    allow_keys(f, "forest", {"n_trees", "max_features", "min_node_size", "subsample_fraction", "bootstrap", "max_depth"});
    read(f, "n_trees", s.forest.n_trees, "forest");
    read(f, "max_features", s.forest.max_features, "forest");
    read(f, "min_node_size", s.forest.min_node_size, "forest");
    read(f, "subsample_fraction", s.forest.subsample_fraction, "forest");
    read(f, "bootstrap", s.forest.bootstrap, "forest");
    read(f, "max_depth", s.forest.max_depth, "forest");
  }
  if (j.contains("boosting")) {
    const auto& b = j.at("boosting");
    allow_keys(b, "boosting", {"n_trees", "max_depth", "learning_rate", "min_node_size", "early_stopping_rounds",
                               "validation_fraction"});
    read(b, "n_trees", s.boosting.n_trees, "boosting");
    read(b, "max_depth", s.boosting.max_depth, "boosting");
    read(b, "learning_rate", s.boosting.learning_rate, "boosting");
    read(b, "min_node_size", s.boosting.min_node_size, "boosting");
    read(b, "early_stopping_rounds", s.boosting.early_stopping_rounds, "boosting");
    read(b, "validation_fraction", s.boosting.validation_fraction, "boosting");
  }
  if (j.contains("transform")) {
    const auto& t = j.at("transform");
    if (!t.is_array()) throw ConfigError("learner transform must be an array");
    s.transform.clear();
    for (const auto& step : t) s.transform.push_back(parse_step(step));
  }
  if (s.forest.n_trees < 1 || s.boosting.n_trees < 0) throw ConfigError("tree counts must be positive");
  if (!(s.forest.subsample_fraction > 0.0 && s.forest.subsample_fraction <= 1.0))
    throw ConfigError("forest.subsample_fraction must lie in (0, 1]");
  if (s.penalty.cv_folds < 2) throw ConfigError("penalty.cv_folds must be at least 2");
  return s;
}

DdmlConfig parse_estimator(const Json& j) {
  allow_keys(j, "estimator", {"learners", "treatment_learners", "stacking", "individual", "K", "V", "R",
                              "aggregation", "stratify"});
  DdmlConfig c;
  if (!j.contains("learners")) throw ConfigError("estimator.learners is required");
  c.learners = parse_learners(j.at("learners"), "learners");
  if (j.contains("treatment_learners")) c.treatment_learners = parse_learners(j.at("treatment_learners"), "treatment_learners");
  if (j.contains("stacking")) c.stacking = parse_stacking(j.at("stacking"));
  read(j, "individual", c.individual, "estimator");
  read(j, "K", c.folds, "estimator");
  read(j, "V", c.cv_folds, "estimator");
  read(j, "R", c.repetitions, "estimator");
  read(j, "stratify", c.stratify, "estimator");
  if (j.contains("aggregation")) {
    std::string a;
    read(j, "aggregation", a, "estimator");
    c.aggregation = aggregation_from_string(a);
  }
  c.validate();
  return c;
}

RunConfig parse_config(const Json& doc) {
  allow_keys(doc, "config", {"seed", "data", "dgp", "estimator", "estimators", "simulation", "output"});
  RunConfig c;
  read(doc, "seed", c.seed, "config");
  if (doc.contains("data")) c.data = parse_data(doc.at("data"));
  if (doc.contains("dgp")) c.dgp = parse_dgp(doc.at("dgp"));
  if (doc.contains("estimator") && doc.contains("estimators"))
    throw ConfigError("give either 'estimator' or 'estimators', not both");
  if (doc.contains("estimator")) c.estimators.push_back(parse_block(doc.at("estimator")));
  if (doc.contains("estimators")) {
    const auto& list = doc.at("estimators");
    if (!list.is_array()) throw ConfigError("estimators must be an array");
    for (const auto& b : list) c.estimators.push_back(parse_block(b));
  }
  if (c.estimators.empty()) throw ConfigError("no estimator block");
  if (doc.contains("simulation")) {
    const auto& s = doc.at("simulation");
    allow_keys(s, "simulation", {"reps", "reference"});
    read(s, "reps", c.reps, "simulation");
    if (s.contains("reference")) {
      double r = 0.0;
      read(s, "reference", r, "simulation");
      c.reference = r;
    }
    if (c.reps < 1) throw ConfigError("simulation.reps must be at least 1");
  }
  if (doc.contains("output")) {
    const auto& o = doc.at("output");
    allow_keys(o, "output", {"dir", "format"});
    read(o, "dir", c.out_dir, "output");
    if (o.contains("format")) {
      std::string f;
      read(o, "format", f, "output");
      c.format = output_format_from_string(f);
    }
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  Json doc;
  try {
    doc = Json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

Json to_json(const LearnerSpec& s) {
  Json j;
  j["name"] = s.display_name();
  j["kind"] = to_string(s.kind);
  j["seed_stream"] = s.seed_stream;
  switch (s.kind) {
    case LearnerKind::lasso_cv:
    case LearnerKind::ridge_cv: {
      Json p;
      p["cv_folds"] = s.penalty.cv_folds;
      p["grid_points"] = s.penalty.grid_points;
      p["grid_ratio"] = s.penalty.grid_ratio;
      p["tolerance"] = s.penalty.tolerance;
      if (s.penalty.lambda) p["lambda"] = *s.penalty.lambda;
      j["penalty"] = p;
      break;
    }
    case LearnerKind::random_forest: {
      Json f;
      f["n_trees"] = s.forest.n_trees;
      f["max_features"] = s.forest.max_features;
      f["min_node_size"] = s.forest.min_node_size;
      f["subsample_fraction"] = s.forest.subsample_fraction;
      f["bootstrap"] = s.forest.bootstrap;
      f["max_depth"] = s.forest.max_depth;
      j["forest"] = f;
      break;
    }
    case LearnerKind::gradient_boosting: {
      Json b;
      b["n_trees"] = s.boosting.n_trees;
      b["max_depth"] = s.boosting.max_depth;
      b["learning_rate"] = s.boosting.learning_rate;
      b["min_node_size"] = s.boosting.min_node_size;
      b["early_stopping_rounds"] = s.boosting.early_stopping_rounds;
      b["validation_fraction"] = s.boosting.validation_fraction;
      j["boosting"] = b;
      break;
    }
    default: break;
  }
  Json t = Json::array();
  for (const auto& step : s.transform) t.push_back(step_json(step));
  j["transform"] = t;
  return j;
}

Json to_json(const DdmlConfig& c) {
  Json j;
  Json l = Json::array(), m = Json::array(), st = Json::array();
  for (const auto& s : c.learners) l.push_back(to_json(s));
  for (const auto& s : c.m_learners()) m.push_back(to_json(s));
  for (const auto& v : c.stacking) st.push_back({{"mode", to_string(v.mode)}, {"final", to_string(v.final)}});
  j["learners"] = l;
  j["treatment_learners"] = m;
  j["stacking"] = st;
  j["individual"] = c.individual;
  j["K"] = c.folds;
  j["V"] = c.cv_folds;
  j["R"] = c.repetitions;
  j["aggregation"] = to_string(c.aggregation);
  j["stratify"] = c.stratify;
  return j;
}

Json to_json(const DgpConfig& c) {
  const auto& s = c.spec;
  Json j;
  j["kind"] = to_string(s.kind);
  j["n"] = s.n;
  j["theta0"] = s.theta0;
  switch (s.kind) {
    case DgpKind::toy_linear:
    case DgpKind::toy_nonlinear:
      j["dim"] = s.dim;
      j["rho"] = s.rho;
      j["r2_target"] = s.r2_target;
      j["c_y"] = s.c_y;
      j["c_d"] = s.c_d;
      j["scales"] = c.fixed_scales ? "given" : "calibrated";
      if (s.kind == DgpKind::toy_nonlinear) j["literal_g"] = s.literal_g;
      break;
    case DgpKind::atet_confounded:
      j["dim"] = s.dim;
      j["rho"] = s.rho;
      break;
    case DgpKind::calibrated:
      j["engine"] = to_string(c.engine);
      j["kappa1"] = s.kappa1;
      j["kappa2"] = s.kappa2;
      if (s.model) j["theta_ols"] = s.model->theta_ols;
      break;
    case DgpKind::bootstrap: break;
  }
  if (c.source) j["source"] = data_json(*c.source);
  return j;
}

Json to_json(const RunConfig& c) {
  Json j;
  j["seed"] = c.seed;
  if (c.data) j["data"] = data_json(*c.data);
  if (c.dgp) j["dgp"] = to_json(*c.dgp);
  Json blocks = Json::array();
  for (const auto& b : c.estimators) {
    Json e;
    e["label"] = b.label;
    e["estimator"] = b.estimator;
    const Json body = to_json(b.ddml);
    for (const auto& [k, v] : body.items()) e[k] = v;
    blocks.push_back(e);
  }
  j["estimators"] = blocks;
  if (c.dgp) {
    j["simulation"]["reps"] = c.reps;
    if (c.reference) j["simulation"]["reference"] = *c.reference;
  }
  j["output"] = {{"dir", c.out_dir}, {"format", to_string(c.format)}};
  return j;
}

}  // namespace ddml
