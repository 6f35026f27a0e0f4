#include "ddml/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "ddml/error.hpp"

namespace ddml {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

Json vec(const VectorXd& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

Json mat(const MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec(m.row(i).transpose()));
  return rows;
}

Json estimate_json(const PointEstimate& e) {
  Json j;
  j["theta"] = vec(e.theta);
  j["se"] = vec(e.se);
  j["ci_low"] = vec(e.ci_low);
  j["ci_high"] = vec(e.ci_high);
  j["n"] = e.n;
  return j;
}

const std::vector<std::string>& learners_for(const RepetitionInfo& info, Target t, int column) {
  for (const auto& s : info.targets)
    if (s.target == t && s.column == column) return s.learners;
  throw ContractError("missing target summary");
}

}  // namespace

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json estimate_report(const RunConfig& config, const Dataset& data, const DdmlResult& result, double seconds) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "estimate";
  j["estimator"] = result.estimator;
  j["seed"] = config.seed;
  j["config"] = to_json(config);
  j["data"] = {{"n", data.rows()},
               {"dropped_rows", data.dropped_rows},
               {"outcome", data.outcome_name},
               {"treatments", data.treatment_names},
               {"covariates", data.covariate_names}};
  j["fit_count"] = result.fit_count;

  Json reps = Json::array();
  for (std::size_t r = 0; r < result.repetitions.size(); ++r) {
    const auto& info = result.repetitions[r];
    Json rj;
    rj["repetition"] = r;
    rj["seed"] = info.seed;
    Json targets = Json::array();
    for (const auto& t : info.targets)
      targets.push_back({{"target", to_string(t.target)},
                         {"column", t.column},
                         {"learners", t.learners},
                         {"mspe", vec(t.mspe)},
                         {"fit_count", t.fit_count}});
    rj["targets"] = targets;
    reps.push_back(rj);
  }
  j["repetitions"] = reps;

  Json variants = Json::array();
  for (const auto& v : result.variants) {
    Json vj;
    vj["name"] = v.name;
    vj["stacked"] = v.stacked;
    if (v.stacked) {
      vj["mode"] = to_string(v.variant.mode);
      vj["final"] = to_string(v.variant.final);
    }
    vj["aggregation"] = to_string(v.estimates.how);
    vj["aggregate"] = estimate_json(v.estimates.aggregate);
    Json per = Json::array();
    for (const auto& e : v.estimates.repetitions) per.push_back(estimate_json(e));
    vj["per_repetition"] = per;
    if (!v.clipped.empty()) vj["clipped_propensities"] = v.clipped;
    if (v.stacked) {
      Json w = Json::array();
      for (std::size_t r = 0; r < v.weights.size(); ++r)
        for (const auto& t : v.weights[r])
          w.push_back({{"repetition", r},
                       {"target", to_string(t.target)},
                       {"column", t.column},
                       {"learners", learners_for(result.repetitions[r], t.target, t.column)},
                       {"weights", mat(t.weights)}});
      vj["weights"] = w;
    }
    variants.push_back(vj);
  }
  j["variants"] = variants;
  j["timing"] = {{"seconds", seconds}};
  return j;
}

Json simulation_report(const RunConfig& config, const SimulationReport& report) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "simulation";
  j["seed"] = report.seed;
  j["reps"] = report.reps;
  j["config"] = to_json(config);
  if (config.dgp) {
    DgpConfig resolved = *config.dgp;
    resolved.spec = report.dgp;
    j["dgp"] = to_json(resolved);
  }
  Json rows = Json::array();
  for (const auto& m : report.estimators) {
    Json r;
    r["estimator"] = m.name;
    r["block"] = m.block;
    r["variant"] = m.variant;
    r["reference"] = m.reference;
    r["completed"] = m.completed;
    r["failures"] = m.failures;
    r["mean_bias"] = m.mean_bias;
    r["se_bias"] = m.se_bias;
    r["mab"] = m.mab;
    r["coverage"] = m.coverage;
    r["mean_se"] = m.mean_se;
    if (!m.errors.empty()) r["errors"] = m.errors;
    Json w = Json::array();
    for (const auto& ws : m.weights) {
      std::vector<std::string> names;
      for (const auto& ms : m.mspe)
        if (ms.target == ws.target && ms.column == ws.column) names = ms.learners;
      w.push_back({{"target", to_string(ws.target)},
                   {"column", ws.column},
                   {"learners", names},
                   {"mean_weights", vec(ws.mean_weights)}});
    }
    r["weights"] = w;
    Json ms = Json::array();
    for (const auto& s : m.mspe)
      ms.push_back({{"target", to_string(s.target)},
                    {"column", s.column},
                    {"learners", s.learners},
                    {"mean_mspe", vec(s.mean_mspe)}});
    r["mspe"] = ms;
    r["theta"] = m.theta;
    rows.push_back(r);
  }
  j["estimators"] = rows;
  Json timing;
  Json blocks = Json::array();
  for (std::size_t b = 0; b < report.block_seconds.size(); ++b)
    blocks.push_back({{"block", config.estimators.at(b).label}, {"seconds", report.block_seconds[b]}});
  timing["blocks"] = blocks;
  timing["wall_seconds"] = report.wall_seconds;
  j["timing"] = timing;
  return j;
}

std::string estimates_csv(const DdmlResult& result) {
  std::ostringstream out;
  out << "variant,coefficient,theta,se,ci_low,ci_high,n,repetitions\n";
  for (const auto& v : result.variants) {
    const auto& a = v.estimates.aggregate;
    for (Eigen::Index c = 0; c < a.theta.size(); ++c)
      out << csv_field(v.name) << ',' << c << ',' << num(a.theta[c]) << ',' << num(a.se[c]) << ','
          << num(a.ci_low[c]) << ',' << num(a.ci_high[c]) << ',' << a.n << ',' << v.estimates.repetitions.size()
          << '\n';
  }
  return out.str();
}

std::string weights_csv(const DdmlResult& result) {
  std::ostringstream out;
  out << "variant,repetition,target,column,fold,learner,weight\n";
  for (const auto& v : result.variants)
    for (std::size_t r = 0; r < v.weights.size(); ++r)
      for (const auto& t : v.weights[r]) {
        const auto& names = learners_for(result.repetitions[r], t.target, t.column);
        for (Eigen::Index k = 0; k < t.weights.rows(); ++k)
          for (Eigen::Index l = 0; l < t.weights.cols(); ++l)
            out << csv_field(v.name) << ',' << r << ',' << to_string(t.target) << ',' << t.column << ','
                << (t.weights.rows() == 1 ? std::string("all") : std::to_string(k + 1)) << ','
                << csv_field(names[l]) << ',' << num(t.weights(k, l)) << '\n';
      }
  return out.str();
}

std::string simulation_csv(const SimulationReport& report) {
  std::ostringstream out;
  out << "estimator,reference,completed,failures,mean_bias,se_bias,mab,coverage,mean_se\n";
  for (const auto& m : report.estimators)
    out << csv_field(m.name) << ',' << num(m.reference) << ',' << m.completed << ',' << m.failures << ','
        << num(m.mean_bias) << ',' << num(m.se_bias) << ',' << num(m.mab) << ',' << num(m.coverage) << ','
        << num(m.mean_se) << '\n';
  return out.str();
}

std::string simulation_weights_csv(const SimulationReport& report) {
  std::ostringstream out;
  out << "estimator,target,column,learner,mean_weight,mean_mspe\n";
  for (const auto& m : report.estimators)
    for (const auto& s : m.mspe) {
      const VectorXd* w = nullptr;
      for (const auto& ws : m.weights)
        if (ws.target == s.target && ws.column == s.column) w = &ws.mean_weights;
      for (std::size_t l = 0; l < s.learners.size(); ++l)
        out << csv_field(m.name) << ',' << to_string(s.target) << ',' << s.column << ',' << csv_field(s.learners[l])
            << ',' << (w ? num((*w)[l]) : std::string()) << ',' << num(s.mean_mspe[l]) << '\n';
    }
  return out.str();
}

std::string estimates_table(const DdmlResult& result) {
  std::ostringstream out;
  std::size_t w = 10;
  for (const auto& v : result.variants) w = std::max(w, v.name.size() + 2);
  out << result.estimator << " estimates (n = " << result.n << ", " << result.repetitions.size()
      << " cross-fitting repetition(s))\n";
  out << pad("variant", w) << pad("coef", 6) << pad("theta", 14) << pad("se", 12) << "95% CI\n";
  for (const auto& v : result.variants) {
    const auto& a = v.estimates.aggregate;
    for (Eigen::Index c = 0; c < a.theta.size(); ++c)
      out << pad(c == 0 ? v.name : "", w) << pad(std::to_string(c), 6) << pad(fixed(a.theta[c]), 14)
          << pad(fixed(a.se[c]), 12) << "[" << fixed(a.ci_low[c]) << ", " << fixed(a.ci_high[c]) << "]\n";
  }
  return out.str();
}

std::string simulation_table(const SimulationReport& report) {
  std::ostringstream out;
  std::size_t w = 12;
  for (const auto& m : report.estimators) w = std::max(w, m.name.size() + 2);
  out << to_string(report.dgp.kind) << ", n = " << report.dgp.n << ", " << report.reps << " replications\n";
  out << pad("estimator", w) << pad("bias", 12) << pad("se(bias)", 12) << pad("MAB", 12) << pad("coverage", 10)
      << "failures\n";
  for (const auto& m : report.estimators)
    out << pad(m.name, w) << pad(fixed(m.mean_bias), 12) << pad(fixed(m.se_bias), 12) << pad(fixed(m.mab), 12)
        << pad(fixed(m.coverage, 3), 10) << m.failures << '\n';
  return out.str();
}

namespace {

struct WeightRow {
  std::string variant, target, fold, learner;
  double weight;
};

std::vector<WeightRow> weight_rows(const Json& report) {
  if (!report.is_object() || !report.contains("kind")) throw DataError("not a report file");
  if (report.value("schema_version", 0) != kSchemaVersion) throw DataError("unsupported report schema version");
  std::vector<WeightRow> rows;
  try {
    const auto kind = report.at("kind").get<std::string>();
    if (kind == "estimate") {
      for (const auto& v : report.at("variants")) {
        if (!v.contains("weights")) continue;
        for (const auto& w : v.at("weights")) {
          const auto names = w.at("learners").get<std::vector<std::string>>();
          const auto& m = w.at("weights");
          const std::string target = w.at("target").get<std::string>() + "[" +
                                     std::to_string(w.at("column").get<int>()) + "] rep " +
                                     std::to_string(w.at("repetition").get<int>());
          for (std::size_t k = 0; k < m.size(); ++k)
            for (std::size_t l = 0; l < names.size(); ++l)
              rows.push_back({v.at("name").get<std::string>(), target,
                              m.size() == 1 ? std::string("all") : std::to_string(k + 1), names[l],
                              m[k][l].get<double>()});
        }
      }
    } else if (kind == "simulation") {
      for (const auto& e : report.at("estimators"))
        for (const auto& w : e.at("weights")) {
          const auto names = w.at("learners").get<std::vector<std::string>>();
          const auto& mw = w.at("mean_weights");
          const std::string target = w.at("target").get<std::string>() + "[" +
                                     std::to_string(w.at("column").get<int>()) + "]";
          for (std::size_t l = 0; l < names.size() && l < mw.size(); ++l)
            rows.push_back({e.at("estimator").get<std::string>(), target, "mean", names[l], mw[l].get<double>()});
        }
    } else {
      throw DataError("unknown report kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return rows;
}

}  // namespace

std::string weights_table(const Json& report) {
  const auto rows = weight_rows(report);
  std::ostringstream out;
  if (rows.empty()) return "no stacking weights in this report\n";
  std::size_t wv = 9, wt = 8, wl = 9;
  for (const auto& r : rows) {
    wv = std::max(wv, r.variant.size() + 2);
    wt = std::max(wt, r.target.size() + 2);
    wl = std::max(wl, r.learner.size() + 2);
  }
  out << pad("variant", wv) << pad("target", wt) << pad("fold", 6) << pad("learner", wl) << "weight\n";
  for (const auto& r : rows)
    out << pad(r.variant, wv) << pad(r.target, wt) << pad(r.fold, 6) << pad(r.learner, wl) << fixed(r.weight)
        << '\n';
  return out.str();
}

std::string weights_table_csv(const Json& report) {
  std::ostringstream out;
  out << "variant,target,fold,learner,weight\n";
  for (const auto& r : weight_rows(report))
    out << csv_field(r.variant) << ',' << csv_field(r.target) << ',' << r.fold << ',' << csv_field(r.learner) << ','
        << num(r.weight) << '\n';
  return out.str();
}

void write_outputs(const std::string& dir, const std::vector<OutputFile>& files) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
  std::vector<std::pair<fs::path, fs::path>> staged;
  auto cleanup = [&] {
    for (const auto& [tmp, dst] : staged) fs::remove(tmp, ec);
  };
  for (const auto& f : files) {
    const fs::path dst = fs::path(dir) / f.name;
    const fs::path tmp = fs::path(dir) / ("." + f.name + ".tmp" + std::to_string(::getpid()));
    std::ofstream out(tmp, std::ios::binary);
    out << f.content;
    out.close();
    if (!out) {
      staged.emplace_back(tmp, dst);
      cleanup();
      throw ConfigError("cannot write '" + dst.string() + "'");
    }
    staged.emplace_back(tmp, dst);
  }
  for (const auto& [tmp, dst] : staged) {
    fs::rename(tmp, dst, ec);
    if (ec) {
      cleanup();
      throw ConfigError("cannot rename into '" + dst.string() + "': " + ec.message());
    }
  }
}

}  // namespace ddml
