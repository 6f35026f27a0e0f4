#include "ddml/tree.hpp"

#include <algorithm>
#include <numeric>

namespace ddml::tree {

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.feature < 0; }));
}

Presorted presort(const Eigen::MatrixXd& x) {
  Presorted s;
  const auto n = static_cast<int>(x.rows());
  s.order.resize(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    auto& o = s.order[f];
    o.resize(n);
    std::iota(o.begin(), o.end(), 0);
    std::stable_sort(o.begin(), o.end(), [&](int a, int b) { return x(a, f) < x(b, f); });
  }
  return s;
}

TreeBuilder::TreeBuilder(const Eigen::MatrixXd& x, const Presorted& sorted) : x_(x), sorted_(sorted) {}

RegressionTree TreeBuilder::build(const Eigen::VectorXd& target, const std::vector<int>& counts,
                                  const TreeParams& params, Rng& rng) {
  const int p = static_cast<int>(x_.cols());
  const int n = static_cast<int>(x_.rows());

  // One array per feature plus a row-order array at index p; every node owns
  // the same [begin, end) range in all of them.
  work_.assign(static_cast<std::size_t>(p) + 1, {});
  for (int f = 0; f <= p; ++f) {
    auto& w = work_[f];
    w.clear();
    for (int i = 0; i < n; ++i) {
      const int r = f < p ? sorted_.order[f][i] : i;
      for (int c = 0; c < counts[r]; ++c) w.push_back(r);
    }
  }
  const int m_total = static_cast<int>(work_[p].size());
  buffer_.resize(static_cast<std::size_t>(m_total));
  goes_left_.assign(static_cast<std::size_t>(n), 0);

  const int min_leaf = std::max(1, params.min_leaf);
  const int mtry = (params.max_features > 0 && params.max_features < p) ? params.max_features : p;
  std::vector<int> features(static_cast<std::size_t>(p));

  RegressionTree tree;
  struct Pending {
    int node, begin, end, depth;
  };
  std::vector<Pending> stack;
  tree.nodes_.emplace_back();
  stack.push_back({0, 0, m_total, 0});

  while (!stack.empty()) {
    const Pending cur = stack.back();
    stack.pop_back();
    const int m = cur.end - cur.begin;
    const auto& rows = work_[p];
    double sum = 0.0;
    bool constant = true;
    const double first = m > 0 ? target[rows[cur.begin]] : 0.0;
    for (int t = cur.begin; t < cur.end; ++t) {
      const double v = target[rows[t]];
      sum += v;
      constant = constant && v == first;
    }
    tree.nodes_[cur.node].value = m > 0 ? sum / m : 0.0;
    if (constant || m < 2 * min_leaf || (params.max_depth >= 0 && cur.depth >= params.max_depth) || p == 0)
      continue;

    std::iota(features.begin(), features.end(), 0);
    if (mtry < p) {
      for (int i = 0; i < mtry; ++i) {
        std::uniform_int_distribution<int> pick(i, p - 1);
        std::swap(features[i], features[pick(rng)]);
      }
      std::sort(features.begin(), features.begin() + mtry);
    }

    const double parent = sum * sum / m;
    double best_score = parent + 1e-12 * std::abs(parent) + 1e-300;
    int best_feature = -1, best_left = 0;
    double best_threshold = 0.0;
    for (int c = 0; c < mtry; ++c) {
      const int f = features[c];
      const auto& w = work_[f];
      double left = 0.0;
      for (int t = cur.begin; t < cur.end - 1; ++t) {
        left += target[w[t]];
        const int n_left = t - cur.begin + 1;
        const int n_right = m - n_left;
        if (n_left < min_leaf) continue;
        if (n_right < min_leaf) break;
        const double a = x_(w[t], f), b = x_(w[t + 1], f);
        if (!(a < b)) continue;
        const double right = sum - left;
        const double score = left * left / n_left + right * right / n_right;
        if (score > best_score) {
          best_score = score;
          best_feature = f;
          best_left = n_left;
          double thr = a + 0.5 * (b - a);
          if (!(thr < b)) thr = a;
          best_threshold = thr;
        }
      }
    }
    if (best_feature < 0) continue;

    const auto& split = work_[best_feature];
    for (int t = cur.begin; t < cur.end; ++t) goes_left_[split[t]] = (t - cur.begin) < best_left ? 1 : 0;
    for (int f = 0; f <= p; ++f) {
      auto& w = work_[f];
      int l = 0, r = best_left;
      for (int t = cur.begin; t < cur.end; ++t) {
        if (goes_left_[w[t]]) buffer_[l++] = w[t];
        else buffer_[r++] = w[t];
      }
      std::copy(buffer_.begin(), buffer_.begin() + m, w.begin() + cur.begin);
    }

    const int left_id = static_cast<int>(tree.nodes_.size());
    tree.nodes_.emplace_back();
    tree.nodes_.emplace_back();
    auto& node = tree.nodes_[cur.node];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = left_id;
    node.right = left_id + 1;
    stack.push_back({left_id + 1, cur.begin + best_left, cur.end, cur.depth + 1});
    stack.push_back({left_id, cur.begin, cur.begin + best_left, cur.depth + 1});
  }
  return tree;
}

}  // namespace ddml::tree
