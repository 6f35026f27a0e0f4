#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddml/data.hpp"
#include "ddml/simulation.hpp"

namespace ddml {

using Json = nlohmann::ordered_json;

struct DataSource {
  std::string path;
  CsvColumns columns;
};

struct DgpConfig {
  DgpSpec spec;
  std::optional<DataSource> source;  // calibrated and bootstrap designs
  CalibrationEngine engine = CalibrationEngine::linear;
  bool fixed_scales = false;  // c_y and c_d given explicitly
};

enum class OutputFormat { json, csv, both };
std::string to_string(OutputFormat f);
OutputFormat output_format_from_string(const std::string& s);

struct RunConfig {
  std::optional<DataSource> data;
  std::optional<DgpConfig> dgp;
  std::vector<EstimatorBlock> estimators;
  int reps = 100;
  std::optional<double> reference;
  std::string out_dir = ".";
  OutputFormat format = OutputFormat::json;
  std::uint64_t seed = 0;
};

// Throws ConfigError on unknown keys, wrong types or invalid values.
RunConfig parse_config(const Json& doc);
RunConfig load_config(const std::string& path);

LearnerSpec parse_learner(const Json& j);
DdmlConfig parse_estimator(const Json& j);

// Resolved configuration with every default spelled out.
Json to_json(const LearnerSpec& spec);
Json to_json(const DdmlConfig& config);
Json to_json(const DgpConfig& dgp);
Json to_json(const RunConfig& config);

}  // namespace ddml
