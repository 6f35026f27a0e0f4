#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "ddml/rng.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace testing {

inline MatrixXd normal_matrix(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  auto rng = ddml::make_rng(seed, {0x7e57});
  std::normal_distribution<double> z;
  MatrixXd m(n, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i) m(i, j) = z(rng);
  return m;
}

inline VectorXd normal_vector(Eigen::Index n, std::uint64_t seed) { return normal_matrix(n, 1, seed).col(0); }

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ddml_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace testing
