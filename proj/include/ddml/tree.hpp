#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "ddml/rng.hpp"

namespace ddml::tree {

struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct TreeParams {
  int max_depth = -1;     // -1: unlimited
  int min_leaf = 1;       // minimum observations in each child
  int max_features = 0;   // candidate features per split, 0: all
};

class RegressionTree {
 public:
  double predict_row(const Eigen::MatrixXd& x, Eigen::Index row) const {
    int k = 0;
    while (nodes_[k].feature >= 0) k = x(row, nodes_[k].feature) <= nodes_[k].threshold ? nodes_[k].left : nodes_[k].right;
    return nodes_[k].value;
  }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t leaf_count() const;

 private:
  friend class TreeBuilder;
  std::vector<Node> nodes_;
};

// Column orders of a training matrix, computed once and reused across trees.
struct Presorted {
  std::vector<std::vector<int>> order;  // order[f] = rows sorted by x(:, f), ties by row index
};
Presorted presort(const Eigen::MatrixXd& x);

// Variance-reduction splits over presorted feature orders. Ties between
// candidate splits go to the lowest feature index, then the lowest threshold.
class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, const Presorted& sorted);

  // `counts[r]` is the multiplicity of training row r in this tree's sample
  // (0 excludes it, >1 for bootstrap duplicates).
  RegressionTree build(const Eigen::VectorXd& target, const std::vector<int>& counts,
                       const TreeParams& params, Rng& rng);

 private:
  const Eigen::MatrixXd& x_;
  const Presorted& sorted_;
  std::vector<std::vector<int>> work_;
  std::vector<int> buffer_;
  std::vector<char> goes_left_;
};

}  // namespace ddml::tree
