#include "uncertainty.hpp"

#include <cmath>

namespace uqxai {

const char* to_string(EpistemicSource s) {
  switch (s) {
    case EpistemicSource::tree_variance: return "tree_variance";
    case EpistemicSource::bootstrap: return "bootstrap";
    case EpistemicSource::mc_dropout: return "mc_dropout";
    case EpistemicSource::rf_surrogate: return "rf_surrogate";
  }
  return "?";
}

const char* to_string(ClassReduction r) {
  return r == ClassReduction::predicted_class ? "predicted_class" : "mean_over_classes";
}

Vector ensemble_epistemic(const std::vector<Matrix>& member_probas, ClassReduction reduction) {
  require(member_probas.size() >= 2, "ensemble_epistemic: need at least 2 members");
  const double m = static_cast<double>(member_probas.size());
  const Eigen::Index n = member_probas.front().rows();
  const Eigen::Index k = member_probas.front().cols();

  bool all_identical = true;
  Matrix mean = Matrix::Zero(n, k);
  for (const auto& p : member_probas) {
    require(p.rows() == n && p.cols() == k, "ensemble_epistemic: member shape mismatch");
    all_identical = all_identical && p == member_probas.front();
    mean += p;
  }
  if (all_identical) return Vector::Zero(n);  // zero iff exact agreement
  mean /= m;

  Matrix var = Matrix::Zero(n, k);  // population variance per (sample, class)
  for (const auto& p : member_probas) var += (p - mean).array().square().matrix();
  var /= m;

  Vector out(n);
  if (reduction == ClassReduction::mean_over_classes) {
    out = var.rowwise().mean();
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index arg;
      mean.row(i).maxCoeff(&arg);
      out(i) = var(i, arg);
    }
  }
  return out;
}

EpistemicScores native_epistemic(const ProbabilisticClassifier& model, const Matrix& x,
                                 ClassReduction reduction, std::uint64_t seed) {
  require(model.capabilities().has_members,
          model.kind() + ": no native uncertainty estimator; use surrogate_epistemic");
  EpistemicScores scores;
  scores.values = ensemble_epistemic(model.per_member_proba(x, seed), reduction);
  scores.reduction = reduction;
  scores.seed = seed;
  if (model.kind() == "random_forest") {
    scores.source = EpistemicSource::tree_variance;
  } else if (model.kind() == "mlp") {
    scores.source = EpistemicSource::mc_dropout;
  } else {
    scores.source = EpistemicSource::bootstrap;
  }
  return scores;
}

EpistemicScores surrogate_epistemic(const RandomForest& surrogate, const Matrix& x, ClassReduction reduction) {
  require(x.cols() == surrogate.n_features(), "surrogate_epistemic: feature count mismatch");
  EpistemicScores scores;
  scores.values = ensemble_epistemic(surrogate.per_member_proba(x, 0), reduction);
  scores.reduction = reduction;
  scores.source = EpistemicSource::rf_surrogate;
  return scores;
}

EpistemicSummary epistemic_summary(const Vector& scores) {
  require(scores.size() > 0, "epistemic_summary: empty scores");
  EpistemicSummary s;
  s.mean = scores.mean();
  s.std = std::sqrt((scores.array() - s.mean).square().mean());
  if (s.mean > 0.0) {
    s.cv = s.std / s.mean;
    s.cv_defined = true;
  } else {
    s.cv = 0.0;
    s.cv_defined = false;
  }
  return s;
}

}  // namespace uqxai
