#include "forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <numeric>

namespace uqxai {

namespace {

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double impurity = std::numeric_limits<double>::infinity();
};

}  // namespace

int DecisionTree::make_leaf(const std::vector<int>& y, const std::vector<std::size_t>& idx,
                            std::size_t begin, std::size_t end) {
  TreeNode node;
  node.class_freq = Vector::Zero(n_classes_);
  for (std::size_t i = begin; i < end; ++i) node.class_freq(y[idx[i]]) += 1.0;
  node.class_freq /= static_cast<double>(end - begin);
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size() - 1);
}

int DecisionTree::build(const Matrix& x, const std::vector<int>& y, std::vector<std::size_t>& idx,
                        std::size_t begin, std::size_t end, int depth, const ForestConfig& cfg,
                        Rng& rng) {
  depth_ = std::max(depth_, depth);
  const std::size_t n = end - begin;
  std::vector<double> counts(static_cast<std::size_t>(n_classes_), 0.0);
  for (std::size_t i = begin; i < end; ++i) counts[static_cast<std::size_t>(y[idx[i]])] += 1.0;
  const bool pure = *std::max_element(counts.begin(), counts.end()) == static_cast<double>(n);

  if (pure || depth >= cfg.max_depth || n < static_cast<std::size_t>(cfg.min_samples_split)) {
    return make_leaf(y, idx, begin, end);
  }

  const int d = static_cast<int>(x.cols());
  const int m = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
  auto sampled = rng.sample_without_replacement(static_cast<std::size_t>(d), static_cast<std::size_t>(m));
  std::sort(sampled.begin(), sampled.end());

  std::vector<std::pair<double, int>> col(n);
  std::vector<double> left_counts(static_cast<std::size_t>(n_classes_));

  auto scan_feature = [&](int feature, SplitChoice* best) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t row = idx[begin + i];
      col[i] = {x(static_cast<Eigen::Index>(row), feature), y[row]};
    }
    std::sort(col.begin(), col.end());
    if (col.front().first == col.back().first) return;

    std::fill(left_counts.begin(), left_counts.end(), 0.0);
    const double total = static_cast<double>(n);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left_counts[static_cast<std::size_t>(col[i].second)] += 1.0;
      if (col[i].first == col[i + 1].first) continue;
      const double n_left = static_cast<double>(i + 1);
      const double n_right = total - n_left;
      if (n_left < cfg.min_samples_leaf || n_right < cfg.min_samples_leaf) continue;
      double right_sq = 0.0, left_sq = 0.0;
      for (int c = 0; c < n_classes_; ++c) {
        const double lc = left_counts[static_cast<std::size_t>(c)];
        const double rc = counts[static_cast<std::size_t>(c)] - lc;
        left_sq += lc * lc;
        right_sq += rc * rc;
      }
      const double impurity =
          (n_left * (1.0 - left_sq / (n_left * n_left)) + n_right * (1.0 - right_sq / (n_right * n_right))) / total;
      if (impurity < best->impurity) {
        best->found = true;
        best->feature = feature;
        best->threshold = 0.5 * (col[i].first + col[i + 1].first);
        best->impurity = impurity;
      }
    }
  };

  SplitChoice best;
  for (std::size_t f : sampled) scan_feature(static_cast<int>(f), &best);
  if (!best.found) {
    // the sampled features were constant here; fall back to the rest in index order
    std::vector<bool> tried(static_cast<std::size_t>(d), false);
    for (auto f : sampled) tried[f] = true;
    for (int f = 0; f < d && !best.found; ++f) {
      if (!tried[static_cast<std::size_t>(f)]) scan_feature(f, &best);
    }
  }
  if (!best.found) return make_leaf(y, idx, begin, end);

  const auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                  idx.begin() + static_cast<std::ptrdiff_t>(end),
                                  [&](std::size_t row) {
                                    return x(static_cast<Eigen::Index>(row), best.feature) <= best.threshold;
                                  });
  const std::size_t split_at = static_cast<std::size_t>(mid - idx.begin());
  // partition keeps sizes consistent with the scan; a degenerate outcome
  // would mean the threshold separated nothing
  require(split_at > begin && split_at < end, "tree build: degenerate partition");

  const int node_id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  nodes_[static_cast<std::size_t>(node_id)].feature = best.feature;
  nodes_[static_cast<std::size_t>(node_id)].threshold = best.threshold;
  const int left = build(x, y, idx, begin, split_at, depth + 1, cfg, rng);
  const int right = build(x, y, idx, split_at, end, depth + 1, cfg, rng);
  nodes_[static_cast<std::size_t>(node_id)].left = left;
  nodes_[static_cast<std::size_t>(node_id)].right = right;
  return node_id;
}

DecisionTree DecisionTree::fit(const Matrix& x, const std::vector<int>& y, int n_classes,
                               const ForestConfig& cfg, Rng rng) {
  require(x.rows() > 0, "tree fit: empty data");
  DecisionTree tree;
  tree.n_classes_ = n_classes;
  std::vector<std::size_t> idx(static_cast<std::size_t>(x.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  tree.build(x, y, idx, 0, idx.size(), 0, cfg, rng);
  return tree;
}

DecisionTree DecisionTree::from_nodes(std::vector<TreeNode> nodes, int n_classes) {
  require(!nodes.empty(), "tree: no nodes");
  DecisionTree tree;
  tree.n_classes_ = n_classes;
  tree.nodes_ = std::move(nodes);
  return tree;
}

int DecisionTree::leaf_for_row(const Vector& x) const {
  int node = 0;
  while (nodes_[static_cast<std::size_t>(node)].feature >= 0) {
    const TreeNode& nd = nodes_[static_cast<std::size_t>(node)];
    node = x(nd.feature) <= nd.threshold ? nd.left : nd.right;
  }
  return node;
}

Vector DecisionTree::predict_proba_row(const Vector& x) const {
  return nodes_[static_cast<std::size_t>(leaf_for_row(x))].class_freq;
}

Matrix RandomForest::predict_proba(const Matrix& x) const {
  require(x.cols() == n_features_, "random_forest: feature count mismatch");
  Matrix acc = Matrix::Zero(x.rows(), n_classes_);
  for (const auto& tree : trees_) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) acc.row(i) += tree.predict_proba_row(x.row(i)).transpose();
  }
  return acc / static_cast<double>(trees_.size());
}

std::vector<Matrix> RandomForest::per_member_proba(const Matrix& x, std::uint64_t) const {
  std::vector<Matrix> out;
  out.reserve(trees_.size());
  for (const auto& tree : trees_) {
    Matrix p(x.rows(), n_classes_);
    for (Eigen::Index i = 0; i < x.rows(); ++i) p.row(i) = tree.predict_proba_row(x.row(i)).transpose();
    out.push_back(std::move(p));
  }
  return out;
}

std::shared_ptr<RandomForest> train_random_forest(const TabularDataset& train, const ForestConfig& config) {
  require(train.n_rows() > 0, "train_random_forest: empty training data");
  const std::size_t n = static_cast<std::size_t>(train.n_rows());
  const int n_classes = train.n_classes();
  Rng root(config.seed);

  std::vector<DecisionTree> trees(static_cast<std::size_t>(config.n_trees));
  auto fit_tree = [&](int t) {
    Rng tree_rng = root.substream(static_cast<std::uint64_t>(t));
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::size_t>(tree_rng.uniform_int(n));
    Matrix bx(static_cast<Eigen::Index>(n), train.features.cols());
    std::vector<int> by(n);
    for (std::size_t i = 0; i < n; ++i) {
      bx.row(static_cast<Eigen::Index>(i)) = train.features.row(static_cast<Eigen::Index>(idx[i]));
      by[i] = train.labels[idx[i]];
    }
    trees[static_cast<std::size_t>(t)] = DecisionTree::fit(bx, by, n_classes, config, tree_rng);
  };

  const int jobs = std::max(1, config.jobs);
  if (jobs == 1) {
    for (int t = 0; t < config.n_trees; ++t) fit_tree(t);
  } else {
    std::atomic<int> next{0};
    std::vector<std::future<void>> workers;
    for (int w = 0; w < jobs; ++w) {
      workers.push_back(std::async(std::launch::async, [&] {
        for (int t = next.fetch_add(1); t < config.n_trees; t = next.fetch_add(1)) fit_tree(t);
      }));
    }
    for (auto& f : workers) f.get();
  }

  return std::make_shared<RandomForest>(std::move(trees), static_cast<int>(train.n_features()), n_classes, config);
}

}  // namespace uqxai
