#pragma once

#include "forest.hpp"
#include "model.hpp"
#include "rng.hpp"

#include <vector>

namespace uqxai {

enum class AttributionMethod { kernel_shap, tree_shap, lime, ig, smoothgrad, smooth_ig, exact_shapley };

const char* to_string(AttributionMethod m);
AttributionMethod attribution_method_from_string(const std::string& name);

struct AttributionVector {
  Vector values;            // length d, signed
  int target_class = 0;
  AttributionMethod method = AttributionMethod::exact_shapley;
  long model_evals = 0;     // model calls actually spent
  bool ridge_stabilized = false;  // kernel_shap fell back to a ridge solve
  std::vector<bool> topk_mask;    // lime: true where the coefficient was kept
};

enum class OutputKind { probability, logit };

// which scalar model output the value function explains
struct AttributionTarget {
  int target_class = 0;
  OutputKind output = OutputKind::probability;
};

// Reference rows defining the interventional value function shared by the
// Shapley variants; drawn once per experiment from the training split.
struct BackgroundSet {
  Matrix rows;  // B x d

  Eigen::Index size() const { return rows.rows(); }

  static BackgroundSet sample(const Matrix& train_features, int b, std::uint64_t seed);
};

// v(S) = mean over background rows of the model output with features in S
// taken from x and the rest from the background row. mask bit j set = j in S.
double interventional_value(const ProbabilisticClassifier& model, const Vector& x,
                            const BackgroundSet& background, std::uint64_t mask,
                            const AttributionTarget& target, long* eval_counter = nullptr);

// Brute-force Shapley by full coalition enumeration; d <= 16.
AttributionVector exact_shapley_oracle(const ProbabilisticClassifier& model, const Vector& x,
                                       const BackgroundSet& background, const AttributionTarget& target);

// Shapley-kernel weighted least squares with the efficiency constraint
// eliminated. n_coalitions >= 2^d - 2 enumerates every coalition, which
// recovers the exact values. Smaller budgets keep all size-1 and size-(d-1)
// coalitions and sample the rest by kernel weight.
AttributionVector kernel_shap(const ProbabilisticClassifier& model, const Vector& x,
                              const BackgroundSet& background, const AttributionTarget& target,
                              long n_coalitions, std::uint64_t seed);

// Exact interventional Shapley values for a forest, computed per (tree,
// background row) by path recursion and averaged; polynomial cost.
// Explains the probability of the target class.
AttributionVector tree_shap(const RandomForest& forest, const Vector& x, const BackgroundSet& background,
                            int target_class);

struct LimeConfig {
  long n_samples = 5000;
  int top_k = 10;
  double kernel_width_scale = 0.75;  // sigma_k = scale * sqrt(d)
  double ridge = 1.0;
};

// Local ridge fit around x: perturbations scaled by the training stds,
// exponential kernel on standardized distance, coefficients outside the
// top_k by |value| zeroed with the mask recorded.
AttributionVector lime(const ProbabilisticClassifier& model, const Vector& x, const Vector& train_stds,
                       int target_class, const LimeConfig& config, std::uint64_t seed);

// Midpoint-rule path integral of the target-class logit from the baseline.
AttributionVector integrated_gradients(const ProbabilisticClassifier& model, const Vector& x,
                                       const Vector& baseline, int steps, int target_class);

// d(logit)/dx at x; the SmoothGrad base.
AttributionVector vanilla_gradient(const ProbabilisticClassifier& model, const Vector& x, int target_class);

enum class SmoothBase { vanilla_gradient, integrated_gradients };

struct SmoothConfig {
  SmoothBase base = SmoothBase::integrated_gradients;
  int n_noise = 50;        // 20 for SG, 50 for SIG
  double sigma = 0.1;
  int ig_steps = 50;
};

// Mean of base attributions over seeded standard-normal noise draws.
AttributionVector smooth(const ProbabilisticClassifier& model, const Vector& x, int target_class,
                         const SmoothConfig& config, std::uint64_t seed);

// Ranks of |phi| (1 = smallest magnitude), average ranks on ties.
Vector abs_ranking(const Vector& phi);

}  // namespace uqxai
