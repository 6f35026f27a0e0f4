#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "ddml/cli.hpp"
#include "ddml/config.hpp"
#include "ddml/pipeline.hpp"
#include "support.hpp"

using namespace ddml;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string err;
  std::string out;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ddml");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::stringstream err, out;
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  const int code = run_cli(static_cast<int>(argv.size()), argv.data());
  std::cerr.rdbuf(old_err);
  std::cout.rdbuf(old_out);
  return {code, err.str(), out.str()};
}

// y, d, x1..x3 with a confounded continuous (or binary) treatment.
std::string data_csv(int n, std::uint64_t seed, bool binary, double treated_share = 0.5) {
  const MatrixXd x = testing::normal_matrix(n, 3, seed);
  const VectorXd e = testing::normal_vector(n, seed + 1), u = testing::normal_vector(n, seed + 2);
  std::ostringstream s;
  s.precision(17);
  s << "y,d,x1,x2,x3\n";
  for (int i = 0; i < n; ++i) {
    double d = 0.5 * x(i, 0) + e[i];
    if (binary) d = i < treated_share * n ? 1.0 : 0.0;
    const double y = 0.8 * d + x(i, 1) + x(i, 0) * x(i, 2) + u[i];
    s << y << ',' << d << ',' << x(i, 0) << ',' << x(i, 1) << ',' << x(i, 2) << '\n';
  }
  return s.str();
}

std::string estimate_config(const fs::path& data, const std::string& estimator_body, const fs::path& out) {
  return R"({"seed": 5, "data": {"path": ")" + data.string() + R"(", "outcome": "y", "treatments": ["d"]},
  "estimator": )" + estimator_body + R"(, "output": {"dir": ")" + out.string() + R"(", "format": "both"}})";
}

Json without_timing(Json j) {
  j.erase("timing");
  return j;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("single OLS learner reproduces the library estimate") {
    const auto dir = testing::scratch_dir("cli_ols");
    testing::write_file(dir / "data.csv", data_csv(120, 1, false));
    testing::write_file(dir / "cfg.json", estimate_config(dir / "data.csv", R"({"learners": ["ols"], "K": 4})", dir / "out"));
    const auto r = cli({"estimate-plm", "--config", (dir / "cfg.json").string()});
    REQUIRE(r.code == 0);
    for (auto f : {"report.json", "estimates.csv", "weights.csv", "summary.txt"}) CHECK(fs::exists(dir / "out" / f));
    const Json report = Json::parse(testing::read_file(dir / "out" / "report.json"));
    CHECK(report["schema_version"] == 1);
    CHECK(report["kind"] == "estimate");

    DdmlConfig cfg;
    cfg.learners = {preset_learner("ols")};
    cfg.folds = 4;
    const auto data = load_csv((dir / "data.csv").string(), {"y", {"d"}, {}, true});
    const auto lib = run_plm(data, cfg, 5);
    CHECK(report["variants"][0]["aggregate"]["theta"][0].get<double>() == lib.variants[0].estimates.aggregate.theta[0]);
    CHECK(report["fit_count"] == 8);
  }

  TEST_CASE("aggregate equals the median of the saved repetitions") {
    const auto dir = testing::scratch_dir("cli_median");
    testing::write_file(dir / "data.csv", data_csv(150, 2, false));
    testing::write_file(dir / "cfg.json",
                        estimate_config(dir / "data.csv",
                                        R"({"learners": ["ols", "lasso_cv"], "stacking": [{"mode": "short", "final": "cls"}], "K": 3, "R": 5})",
                                        dir / "out"));
    REQUIRE(cli({"estimate-plm", "--config", (dir / "cfg.json").string()}).code == 0);
    const Json report = Json::parse(testing::read_file(dir / "out" / "report.json"));
    for (const auto& v : report["variants"]) {
      std::vector<double> th;
      for (const auto& r : v["per_repetition"]) th.push_back(r["theta"][0].get<double>());
      REQUIRE(th.size() == 5);
      std::sort(th.begin(), th.end());
      CHECK(v["aggregate"]["theta"][0].get<double>() == th[2]);
    }
  }

  TEST_CASE("reports do not depend on the thread count") {
    const auto dir = testing::scratch_dir("cli_threads");
    testing::write_file(dir / "data.csv", data_csv(150, 3, false));
    testing::write_file(dir / "cfg.json",
                        estimate_config(dir / "data.csv",
                                        R"({"learners": ["ols", {"preset": "rf_low", "forest": {"n_trees": 20}}, "gbt_low"],
                                            "stacking": [{"mode": "conventional", "final": "cls"}, {"mode": "pooled", "final": "cls"}],
                                            "K": 3, "V": 3, "R": 2})",
                                        dir / "out"));
    std::vector<Json> reports;
    std::vector<std::string> csvs;
    for (const char* t : {"1", "2", "4"}) {
      const auto out = dir / ("t" + std::string(t));
      REQUIRE(cli({"estimate-plm", "--config", (dir / "cfg.json").string(), "--threads", t, "--out", out.string()}).code == 0);
      Json j = without_timing(Json::parse(testing::read_file(out / "report.json")));
      j["config"].erase("output");
      reports.push_back(j);
      csvs.push_back(testing::read_file(out / "estimates.csv") + testing::read_file(out / "weights.csv"));
    }
    CHECK(reports[0].dump() == reports[1].dump());
    CHECK(reports[0].dump() == reports[2].dump());
    CHECK(csvs[0] == csvs[1]);
    CHECK(csvs[0] == csvs[2]);
  }

  TEST_CASE("exit codes and one-line errors") {
    const auto dir = testing::scratch_dir("cli_errors");
    testing::write_file(dir / "data.csv", data_csv(60, 4, false));
    // configuration: unknown key
    testing::write_file(dir / "bad_key.json", R"({"seed": 1, "colour": "blue"})");
    auto r = cli({"estimate-plm", "--config", (dir / "bad_key.json").string()});
    CHECK(r.code == 2);
    CHECK(r.err.rfind("error: config: ", 0) == 0);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
    // configuration: missing column
    testing::write_file(dir / "missing.json",
                        R"({"data": {"path": ")" + (dir / "data.csv").string() +
                            R"(", "outcome": "wage", "treatments": ["d"]}, "estimator": {"learners": ["ols"]}})");
    CHECK(cli({"estimate-plm", "--config", (dir / "missing.json").string(), "--out", (dir / "o1").string()}).code == 2);
    // ATET on a continuous treatment
    testing::write_file(dir / "atet.json", estimate_config(dir / "data.csv", R"({"learners": ["ols"]})", dir / "o2"));
    r = cli({"estimate-atet", "--config", (dir / "atet.json").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("treatment not binary") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "o2" / "report.json"));
    // a data path that does not exist is a configuration problem, like a missing column
    testing::write_file(dir / "nofile.json", estimate_config(dir / "absent.csv", R"({"learners": ["ols"]})", dir / "o3"));
    CHECK(cli({"estimate-plm", "--config", (dir / "nofile.json").string()}).code == 2);
    // data: non-numeric cell
    testing::write_file(dir / "text.csv", "y,d,x1\n1,0,a\n2,1,3\n");
    testing::write_file(dir / "text.json", estimate_config(dir / "text.csv", R"({"learners": ["ols"], "K": 2})", dir / "o4"));
    CHECK(cli({"estimate-plm", "--config", (dir / "text.json").string()}).code == 3);
    // numerical: a constant treatment is reproduced exactly by every fold's fit
    testing::write_file(dir / "dup.csv", "y,d,x1\n1,1,1\n2,1,2\n1,1,3\n5,1,4\n2,1,5\n3,1,6\n");
    testing::write_file(dir / "dup.json", estimate_config(dir / "dup.csv", R"({"learners": ["ols"], "K": 2})", dir / "o5"));
    r = cli({"estimate-plm", "--config", (dir / "dup.json").string()});
    CHECK(r.code == 4);
    CHECK(r.err.find("degenerate denominator") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "o5"));
    // command-line problems
    CHECK(cli({"estimate-plm"}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({"estimate-plm", "--config", (dir / "atet.json").string(), "--threads", "0"}).code == 2);
    // oracle learners only make sense in simulations
    testing::write_file(dir / "oracle.json", estimate_config(dir / "data.csv", R"({"learners": ["oracle"]})", dir / "o6"));
    CHECK(cli({"estimate-plm", "--config", (dir / "oracle.json").string()}).code == 2);
  }

  TEST_CASE("four-row ATET example through the command line") {
    const auto dir = testing::scratch_dir("cli_atet4");
    // the four rows twice, so each training set keeps two controls to fit
    testing::write_file(dir / "data.csv", "y,d\n3,1\n5,1\n1,0\n1,0\n3,1\n5,1\n1,0\n1,0\n");
    testing::write_file(dir / "cfg.json", estimate_config(dir / "data.csv", R"({"learners": ["ols"], "K": 2, "stratify": true})", dir / "out"));
    REQUIRE(cli({"estimate-atet", "--config", (dir / "cfg.json").string()}).code == 0);
    const Json report = Json::parse(testing::read_file(dir / "out" / "report.json"));
    CHECK(report["variants"][0]["aggregate"]["theta"][0].get<double>() == 3.0);
  }

  TEST_CASE("stratified folds rescue an imbalanced ATET") {
    const auto dir = testing::scratch_dir("cli_strat");
    // 2 treated rows in 50: unstratified folds often put both in one fold
    testing::write_file(dir / "data.csv", data_csv(50, 5, true, 0.04));
    testing::write_file(dir / "plain.json", estimate_config(dir / "data.csv", R"({"learners": ["ols"], "K": 5})", dir / "plain"));
    testing::write_file(dir / "strat.json",
                        estimate_config(dir / "data.csv", R"({"learners": ["ols"], "K": 5, "stratify": true})", dir / "strat"));
    std::string failing;
    for (int seed = 1; seed <= 60 && failing.empty(); ++seed) {
      const auto r = cli({"estimate-atet", "--config", (dir / "plain.json").string(), "--seed", std::to_string(seed)});
      if (r.code != 0) {
        CHECK(r.code == 3);
        CHECK(r.err.find("stratified") != std::string::npos);
        failing = std::to_string(seed);
      }
    }
    REQUIRE_FALSE(failing.empty());
    CHECK(cli({"estimate-atet", "--config", (dir / "strat.json").string(), "--seed", failing}).code == 0);
    const Json report = Json::parse(testing::read_file(dir / "strat" / "report.json"));
    CHECK(report["estimator"] == "atet");
    CHECK(report["seed"].get<std::uint64_t>() == std::stoull(failing));
    CHECK(report["variants"][0].contains("clipped_propensities"));
  }

  TEST_CASE("weights command re-prints a saved report") {
    const auto dir = testing::scratch_dir("cli_weights");
    testing::write_file(dir / "data.csv", data_csv(120, 6, false));
    testing::write_file(dir / "cfg.json",
                        estimate_config(dir / "data.csv",
                                        R"({"learners": ["ols", "lasso_cv"], "stacking": [{"mode": "short", "final": "cls"}], "K": 3})",
                                        dir / "out"));
    REQUIRE(cli({"estimate-plm", "--config", (dir / "cfg.json").string()}).code == 0);
    auto r = cli({"weights", "--report", (dir / "out" / "report.json").string(), "--format", "csv"});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("variant,target,fold,learner,weight\n", 0) == 0);
    CHECK(r.out.find("short/cls,") != std::string::npos);
    CHECK(r.out.find(",all,ols,") != std::string::npos);
    r = cli({"weights", "--report", (dir / "out" / "report.json").string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("lasso_cv") != std::string::npos);
    CHECK(cli({"weights", "--report", (dir / "nope.json").string()}).code == 3);
  }

  TEST_CASE("simulate writes bias, MAB and coverage and is reproducible") {
    const auto dir = testing::scratch_dir("cli_sim");
    testing::write_file(dir / "cfg.json", R"({"seed": 3,
      "dgp": {"kind": "toy_linear", "n": 200},
      "estimators": [{"label": "oracle", "learners": ["oracle"], "K": 2},
                     {"label": "stack", "learners": ["ols", "lasso_cv"], "stacking": [{"mode": "short", "final": "cls"}],
                      "individual": false, "K": 3}],
      "simulation": {"reps": 4}, "output": {"format": "both"}})");
    std::vector<std::string> csv;
    for (const char* t : {"1", "3"}) {
      const auto out = dir / ("t" + std::string(t));
      REQUIRE(cli({"simulate", "--config", (dir / "cfg.json").string(), "--out", out.string(), "--threads", t}).code == 0);
      csv.push_back(testing::read_file(out / "simulation.csv") + testing::read_file(out / "simulation_weights.csv"));
    }
    CHECK(csv[0] == csv[1]);
    CHECK(csv[0].rfind("estimator,reference,completed,failures,mean_bias,se_bias,mab,coverage,mean_se\n", 0) == 0);
    CHECK(csv[0].find("oracle:oracle,") != std::string::npos);
    CHECK(csv[0].find("stack:short/cls,") != std::string::npos);
    const Json j = Json::parse(testing::read_file(dir / "t1" / "simulation.json"));
    CHECK(j["kind"] == "simulation");
    CHECK(j["estimators"][0]["theta"].size() == 4);
    CHECK(j["dgp"]["c_y"].get<double>() > 0.0);
    // --reps override and learner filter
    REQUIRE(cli({"simulate", "--config", (dir / "cfg.json").string(), "--out", (dir / "f1").string(), "--reps", "2",
                 "--learners", "oracle,ols"})
                .code == 0);
    const Json f = Json::parse(testing::read_file(dir / "f1" / "simulation.json"));
    CHECK(f["reps"] == 2);
    CHECK(f["estimators"][1]["weights"][0]["learners"].size() == 1);
    // filtering the stack block down to nothing is a configuration error
    CHECK(cli({"simulate", "--config", (dir / "cfg.json").string(), "--out", (dir / "f2").string(), "--learners", "oracle"})
              .code == 2);
    CHECK(cli({"simulate", "--config", (dir / "cfg.json").string(), "--reps", "0"}).code == 2);
  }
  TEST_CASE("simulate timing: short stacking is cheaper than conventional at V=5, J=5") {
    const auto dir = testing::scratch_dir("cli_timing");
    const std::string learners =
        R"(["ols", "lasso_cv", "ridge_cv", {"preset": "lasso_cv", "name": "lasso_b", "penalty": {"grid_points": 60}},
            {"preset": "gbt_low", "boosting": {"n_trees": 40}}])";
    testing::write_file(dir / "cfg.json", R"({"seed": 4, "dgp": {"kind": "toy_nonlinear", "n": 400},
      "estimators": [
        {"label": "short", "learners": )" + learners + R"(, "stacking": [{"mode": "short", "final": "cls"}], "individual": false, "K": 5},
        {"label": "conv", "learners": )" + learners + R"(, "stacking": [{"mode": "conventional", "final": "cls"}], "individual": false, "K": 5, "V": 5}],
      "simulation": {"reps": 2}, "output": {"format": "json"}})");
    REQUIRE(cli({"simulate", "--config", (dir / "cfg.json").string(), "--out", (dir / "out").string()}).code == 0);
    const Json j = Json::parse(testing::read_file(dir / "out" / "simulation.json"));
    const auto& blocks = j["timing"]["blocks"];
    REQUIRE(blocks.size() == 2);
    CHECK(blocks[0]["block"] == "short");
    CHECK(blocks[0]["seconds"].get<double>() < blocks[1]["seconds"].get<double>());
    CHECK_FALSE(fs::exists(dir / "out" / "simulation.csv"));
  }
}
