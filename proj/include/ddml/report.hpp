#pragma once

#include <string>
#include <vector>

#include "ddml/config.hpp"
#include "ddml/pipeline.hpp"
#include "ddml/simulation.hpp"

namespace ddml {

inline constexpr int kSchemaVersion = 1;

// Reports keep wall-clock measurements under the top-level "timing" key so
// the rest of the payload is reproducible byte for byte.
Json estimate_report(const RunConfig& config, const Dataset& data, const DdmlResult& result, double seconds);
Json simulation_report(const RunConfig& config, const SimulationReport& report);

std::string estimates_csv(const DdmlResult& result);
std::string weights_csv(const DdmlResult& result);
std::string simulation_csv(const SimulationReport& report);
std::string simulation_weights_csv(const SimulationReport& report);

std::string estimates_table(const DdmlResult& result);
std::string simulation_table(const SimulationReport& report);
// Weight tables re-read from a saved report (estimate or simulation).
std::string weights_table(const Json& report);
std::string weights_table_csv(const Json& report);

std::string dump(const Json& j);

// Writes every file to a temporary name first and renames only after all of
// them were written, so a failure leaves no partial outputs behind.
struct OutputFile {
  std::string name;
  std::string content;
};
void write_outputs(const std::string& dir, const std::vector<OutputFile>& files);

}  // namespace ddml
