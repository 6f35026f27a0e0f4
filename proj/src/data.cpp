#include "ddml/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "ddml/error.hpp"

namespace ddml {

bool is_binary(const VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v[i] != 0.0 && v[i] != 1.0) return false;
  return true;
}

void Dataset::validate() {
  const auto n = y.size();
  if (n < 2) throw DataError("dataset needs at least 2 rows, got " + std::to_string(n));
  if (d.rows() != n || x.rows() != n)
    throw DataError("outcome, treatment and covariate columns differ in length");
  if (d.cols() < 1) throw DataError("dataset needs at least one treatment column");
  if (!y.allFinite() || !d.allFinite() || !x.allFinite())
    throw DataError("dataset contains non-finite values");
  treatment_binary.assign(static_cast<std::size_t>(d.cols()), false);
  for (Eigen::Index c = 0; c < d.cols(); ++c) treatment_binary[c] = is_binary(d.col(c));
  if (treatment_names.size() != static_cast<std::size_t>(d.cols())) {
    treatment_names.clear();
    for (Eigen::Index c = 0; c < d.cols(); ++c) treatment_names.push_back("d" + std::to_string(c + 1));
  }
  if (covariate_names.size() != static_cast<std::size_t>(x.cols())) {
    covariate_names.clear();
    for (Eigen::Index c = 0; c < x.cols(); ++c) covariate_names.push_back("x" + std::to_string(c + 1));
  }
  if (outcome_name.empty()) outcome_name = "y";
}

Dataset make_dataset(VectorXd y, MatrixXd d, MatrixXd x) {
  Dataset data;
  data.y = std::move(y);
  data.d = std::move(d);
  data.x = std::move(x);
  data.validate();
  return data;
}

Dataset take_rows(const Dataset& data, const std::vector<int>& rows) {
  Dataset out;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.y.resize(m);
  out.d.resize(m, data.d.cols());
  out.x.resize(m, data.x.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    out.y[i] = data.y[rows[i]];
    out.d.row(i) = data.d.row(rows[i]);
    out.x.row(i) = data.x.row(rows[i]);
  }
  out.outcome_name = data.outcome_name;
  out.treatment_names = data.treatment_names;
  out.covariate_names = data.covariate_names;
  out.validate();
  return out;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;
  if (text.size() >= 3 && text.compare(0, 3, "\xEF\xBB\xBF") == 0) i = 3;  // UTF-8 BOM

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };

  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_record();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw DataError("unterminated quoted field in CSV input");
  if (!field.empty() || !record.empty()) end_record();
  return records;
}

bool parse_cell(const std::string& cell, double& value) {
  std::size_t b = 0, e = cell.size();
  while (b < e && std::isspace(static_cast<unsigned char>(cell[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(cell[e - 1]))) --e;
  if (b == e) return false;
  std::string_view s(cell.data() + b, e - b);
  if (s == "NA") return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return false;
  return std::isfinite(value);
}

Dataset load_csv(const std::string& path, const CsvColumns& columns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open data file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const auto records = parse_csv(buffer.str());
  if (records.empty()) throw DataError("data file '" + path + "' has no header row");

  const auto& header = records.front();
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < header.size(); ++c) index.emplace(header[c], c);
  auto locate = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw ConfigError("column '" + name + "' not found in '" + path + "'");
    return it->second;
  };

  if (columns.treatments.empty()) throw ConfigError("at least one treatment column is required");
  const std::size_t outcome_col = locate(columns.outcome);
  std::vector<std::size_t> treat_cols, cov_cols;
  for (const auto& t : columns.treatments) treat_cols.push_back(locate(t));
  std::vector<std::string> cov_names;
  if (columns.use_rest && columns.covariates.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == outcome_col || std::find(treat_cols.begin(), treat_cols.end(), c) != treat_cols.end())
        continue;
      cov_cols.push_back(c);
      cov_names.push_back(header[c]);
    }
  } else {
    for (const auto& name : columns.covariates) {
      cov_cols.push_back(locate(name));
      cov_names.push_back(name);
    }
  }

  std::vector<double> ys, ds, xs;
  std::size_t dropped = 0;
  std::vector<double> row_d(treat_cols.size()), row_x(cov_cols.size());
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    auto cell = [&](std::size_t c, double& v) { return c < rec.size() && parse_cell(rec[c], v); };
    double yv = 0.0;
    bool ok = cell(outcome_col, yv);
    for (std::size_t k = 0; ok && k < treat_cols.size(); ++k) ok = cell(treat_cols[k], row_d[k]);
    for (std::size_t k = 0; ok && k < cov_cols.size(); ++k) ok = cell(cov_cols[k], row_x[k]);
    if (!ok) {
      ++dropped;
      continue;
    }
    ys.push_back(yv);
    ds.insert(ds.end(), row_d.begin(), row_d.end());
    xs.insert(xs.end(), row_x.begin(), row_x.end());
  }
  if (ys.empty()) throw DataError("no usable rows in '" + path + "'");

  const auto n = static_cast<Eigen::Index>(ys.size());
  const auto q = static_cast<Eigen::Index>(treat_cols.size());
  const auto p = static_cast<Eigen::Index>(cov_cols.size());
  Dataset data;
  data.y = Eigen::Map<VectorXd>(ys.data(), n);
  data.d = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(ds.data(), n, q);
  data.x = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(xs.data(), n, p);
  data.outcome_name = columns.outcome;
  data.treatment_names = columns.treatments;
  data.covariate_names = std::move(cov_names);
  data.dropped_rows = dropped;
  data.validate();
  return data;
}

}  // namespace ddml
