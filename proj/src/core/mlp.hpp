#pragma once

#include "dataset.hpp"
#include "model.hpp"

namespace uqxai {

struct MlpConfig {
  std::vector<int> hidden = {128, 64};
  double dropout = 0.3;
  double learning_rate = 1e-3;
  int batch_size = 32;
  int max_epochs = 100;
  int patience = 10;          // epochs without val-loss improvement
  int mc_members = 50;
  std::uint64_t seed = 0;
};

// Fully-connected ReLU network, Adam-trained with inverted dropout after each
// hidden layer and early stopping that restores the best validation
// parameters. Weights and biases start at U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
// Inference is deterministic; dropout only runs when sampling MC members.
// Batches are reduced in sample order, so a fixed seed gives a fixed fit.
class MlpClassifier final : public ProbabilisticClassifier {
 public:
  MlpClassifier(std::vector<Matrix> weights, std::vector<Vector> biases, MlpConfig config)
      : weights_(std::move(weights)), biases_(std::move(biases)), config_(config) {}

  std::string kind() const override { return "mlp"; }
  int n_features() const override { return static_cast<int>(weights_.front().cols()); }
  int n_classes() const override { return static_cast<int>(weights_.back().rows()); }
  Capabilities capabilities() const override { return {true, true, true}; }
  int member_count() const override { return config_.mc_members; }

  Matrix predict_logits(const Matrix& x) const override;
  Matrix predict_proba(const Matrix& x) const override { return softmax_rows(predict_logits(x)); }

  // MC dropout: member m, row i uses the RNG substream keyed by (m, i), so
  // scores do not depend on how callers batch their inputs
  std::vector<Matrix> per_member_proba(const Matrix& x, std::uint64_t seed) const override;

  Vector input_gradient(const Vector& x, int target_class) const override;
  Vector cross_entropy_input_gradient(const Vector& x, int label) const override;

  // mean cross-entropy on a batch, eval mode (no dropout); the gradient pair
  // backs the finite-difference verification of the training path
  double batch_loss(const Matrix& x, const std::vector<int>& y) const;
  void param_gradients(const Matrix& x, const std::vector<int>& y, std::vector<Matrix>* grad_w,
                       std::vector<Vector>* grad_b) const;

  const std::vector<Matrix>& weights() const { return weights_; }
  const std::vector<Vector>& biases() const { return biases_; }
  const MlpConfig& config() const { return config_; }

 private:
  std::vector<Matrix> weights_;  // layer l: (fan_out x fan_in)
  std::vector<Vector> biases_;
  MlpConfig config_;

  Vector logits_row_dropout(const Vector& x, class Rng& rng) const;
  Vector input_gradient_impl(const Vector& x, const Vector& dlogits) const;
};

std::shared_ptr<MlpClassifier> train_mlp(const TabularDataset& train, const TabularDataset& val,
                                         const MlpConfig& config = {});

}  // namespace uqxai
