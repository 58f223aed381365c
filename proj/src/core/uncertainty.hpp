#pragma once

#include "forest.hpp"
#include "model.hpp"

namespace uqxai {

enum class EpistemicSource { tree_variance, bootstrap, mc_dropout, rf_surrogate };
enum class ClassReduction { predicted_class, mean_over_classes };

const char* to_string(EpistemicSource s);
const char* to_string(ClassReduction r);

struct EpistemicScores {
  Vector values;  // one nonnegative score per sample
  EpistemicSource source;
  ClassReduction reduction;
  std::uint64_t seed = 0;  // the member-set seed actually used (MC dropout)
};

struct EpistemicSummary {
  double mean = 0.0;
  double std = 0.0;   // population
  double cv = 0.0;
  bool cv_defined = true;  // false when mean is 0
};

// Per-class population variance across members, reduced to a scalar either at
// the argmax class of the mean probability or by averaging over classes.
Vector ensemble_epistemic(const std::vector<Matrix>& member_probas, ClassReduction reduction);

// Dispatch on the model's own members (trees, bootstrap refits, MC dropout).
EpistemicScores native_epistemic(const ProbabilisticClassifier& model, const Matrix& x,
                                 ClassReduction reduction, std::uint64_t seed);

// Tree-variance scores from a forest trained beside an opaque predictor.
EpistemicScores surrogate_epistemic(const RandomForest& surrogate, const Matrix& x, ClassReduction reduction);

EpistemicSummary epistemic_summary(const Vector& scores);

}  // namespace uqxai
