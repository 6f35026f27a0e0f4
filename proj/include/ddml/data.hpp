#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ddml {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Outcome, treatment columns and covariates for n observations.
struct Dataset {
  VectorXd y;
  MatrixXd d;  // n x q
  MatrixXd x;  // n x p, p may be zero
  std::string outcome_name;
  std::vector<std::string> treatment_names;
  std::vector<std::string> covariate_names;
  std::vector<bool> treatment_binary;  // per treatment column
  std::size_t dropped_rows = 0;

  std::size_t rows() const { return static_cast<std::size_t>(y.size()); }
  std::size_t covariate_count() const { return static_cast<std::size_t>(x.cols()); }
  std::size_t treatment_count() const { return static_cast<std::size_t>(d.cols()); }

  // Recomputes treatment_binary and checks shape/finiteness invariants.
  // Throws DataError on violation.
  void validate();
};

bool is_binary(const VectorXd& v);

// Builds a dataset from in-memory columns, filling default names.
Dataset make_dataset(VectorXd y, MatrixXd d, MatrixXd x);

// Rows at the given indices (duplicates allowed, e.g. bootstrap draws).
Dataset take_rows(const Dataset& data, const std::vector<int>& rows);

struct CsvColumns {
  std::string outcome;
  std::vector<std::string> treatments;
  std::vector<std::string> covariates;  // empty with use_rest=true selects every other column
  bool use_rest = true;
};

// Reads an RFC-4180 style file with a header row. Rows with missing ("NA" or
// empty), unparseable or non-finite cells in a selected column are dropped and
// counted in Dataset::dropped_rows.
Dataset load_csv(const std::string& path, const CsvColumns& columns);

// Lower-level pieces, exposed for tests.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);
bool parse_cell(const std::string& cell, double& value);

}  // namespace ddml
