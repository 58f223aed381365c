#pragma once

#include "dataset.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace uqxai {

struct ForestConfig {
  int n_trees = 100;
  int max_depth = 15;
  int min_samples_split = 10;
  int min_samples_leaf = 4;
  std::uint64_t seed = 0;
  int jobs = 1;
};

// Array-backed binary tree. Internal nodes carry (feature, threshold);
// leaves carry the class frequency vector of the training samples they hold.
struct TreeNode {
  int feature = -1;        // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  Vector class_freq;       // leaves only, sums to 1
};

class DecisionTree {
 public:
  // Gini splits over ceil(sqrt(d)) features sampled per node; equal-impurity
  // ties go to the lowest feature index, then the lowest threshold.
  static DecisionTree fit(const Matrix& x, const std::vector<int>& y, int n_classes,
                          const ForestConfig& cfg, Rng rng);

  // deserialization path
  static DecisionTree from_nodes(std::vector<TreeNode> nodes, int n_classes);

  Vector predict_proba_row(const Vector& x) const;
  int leaf_for_row(const Vector& x) const;

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int max_depth() const { return depth_; }

 private:
  std::vector<TreeNode> nodes_;
  int depth_ = 0;
  int n_classes_ = 0;

  int build(const Matrix& x, const std::vector<int>& y, std::vector<std::size_t>& idx,
            std::size_t begin, std::size_t end, int depth, const ForestConfig& cfg, Rng& rng);
  int make_leaf(const std::vector<int>& y, const std::vector<std::size_t>& idx, std::size_t begin,
                std::size_t end);
};

class RandomForest final : public ProbabilisticClassifier {
 public:
  RandomForest(std::vector<DecisionTree> trees, int n_features, int n_classes, ForestConfig config)
      : trees_(std::move(trees)), n_features_(n_features), n_classes_(n_classes), config_(config) {}

  std::string kind() const override { return "random_forest"; }
  int n_features() const override { return n_features_; }
  int n_classes() const override { return n_classes_; }
  Capabilities capabilities() const override { return {true, false, false}; }
  int member_count() const override { return static_cast<int>(trees_.size()); }

  Matrix predict_proba(const Matrix& x) const override;
  std::vector<Matrix> per_member_proba(const Matrix& x, std::uint64_t seed) const override;

  const std::vector<DecisionTree>& trees() const { return trees_; }
  const ForestConfig& config() const { return config_; }

 private:
  std::vector<DecisionTree> trees_;
  int n_features_;
  int n_classes_;
  ForestConfig config_;
};

// Bootstrap resample per tree, per-tree RNG substreams so tree t is identical
// regardless of the parallelism degree.
std::shared_ptr<RandomForest> train_random_forest(const TabularDataset& train, const ForestConfig& config = {});

}  // namespace uqxai
