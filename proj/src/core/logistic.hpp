#pragma once

#include "dataset.hpp"
#include "model.hpp"

#include <optional>

namespace uqxai {

struct LogisticConfig {
  double l2_strength = 1.0;     // 1/C
  double grad_tol = 1e-6;       // on the per-sample-scaled objective gradient
  int max_iters = 200000;
  std::uint64_t seed = 0;       // kept for provenance; the fit itself is deterministic
};

// L2-regularized logistic regression fit by full-batch gradient descent with
// backtracking line search. Binary models keep a single weight row (sigmoid);
// exposed logits are (0, w.x + b) so softmax reproduces the sigmoid.
class LogisticClassifier final : public ProbabilisticClassifier {
 public:
  LogisticClassifier(Matrix weights, Vector bias, int n_classes, LogisticConfig config)
      : weights_(std::move(weights)), bias_(std::move(bias)), n_classes_(n_classes), config_(config) {}

  std::string kind() const override { return "logistic"; }
  int n_features() const override { return static_cast<int>(weights_.cols()); }
  int n_classes() const override { return n_classes_; }
  Capabilities capabilities() const override { return {false, true, true}; }

  Matrix predict_proba(const Matrix& x) const override;
  Matrix predict_logits(const Matrix& x) const override;
  Vector input_gradient(const Vector& x, int target_class) const override;
  Vector cross_entropy_input_gradient(const Vector& x, int label) const override;

  const Matrix& weights() const { return weights_; }
  const Vector& bias() const { return bias_; }
  const LogisticConfig& config() const { return config_; }

 private:
  Matrix weights_;  // 1 x d binary, K x d otherwise
  Vector bias_;
  int n_classes_;
  LogisticConfig config_;
};

std::shared_ptr<LogisticClassifier> train_logistic(const TabularDataset& train, const LogisticConfig& config = {});

// Bootstrap ensemble for epistemic estimates: M refits on resampled training
// data; predict_proba is the member mean.
class BootstrapLogistic final : public ProbabilisticClassifier {
 public:
  explicit BootstrapLogistic(std::vector<std::shared_ptr<LogisticClassifier>> members)
      : members_(std::move(members)) {
    require(!members_.empty(), "BootstrapLogistic: no members");
  }

  std::string kind() const override { return "logistic_bootstrap"; }
  int n_features() const override { return members_.front()->n_features(); }
  int n_classes() const override { return members_.front()->n_classes(); }
  Capabilities capabilities() const override { return {true, false, false}; }
  int member_count() const override { return static_cast<int>(members_.size()); }

  Matrix predict_proba(const Matrix& x) const override;
  std::vector<Matrix> per_member_proba(const Matrix& x, std::uint64_t seed) const override;

  const std::vector<std::shared_ptr<LogisticClassifier>>& members() const { return members_; }

 private:
  std::vector<std::shared_ptr<LogisticClassifier>> members_;
};

std::shared_ptr<BootstrapLogistic> train_logistic_bootstrap(const TabularDataset& train, int n_members,
                                                            std::uint64_t seed,
                                                            const LogisticConfig& config = {});

}  // namespace uqxai
