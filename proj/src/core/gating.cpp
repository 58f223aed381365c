#include "gating.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace uqxai {

const char* to_string(GateMode m) { return m == GateMode::route ? "route" : "defer"; }

const char* to_string(GateDecision d) {
  switch (d) {
    case GateDecision::cheap: return "cheap";
    case GateDecision::expensive: return "expensive";
    case GateDecision::explain: return "explain";
    case GateDecision::defer: return "defer";
  }
  return "?";
}

GatePolicy calibrate_threshold(const Vector& scores, double nu, GateMode mode) {
  const std::size_t n = static_cast<std::size_t>(scores.size());
  require(n > 0, "calibrate_threshold: empty scores");
  require(nu >= 0.0 && nu <= 1.0, "calibrate_threshold: nu must be in [0, 1]");

  std::size_t k = static_cast<std::size_t>(std::llround(nu * static_cast<double>(n)));
  k = std::min(k, n);

  // rank by score descending, ties by sample index ascending
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores(static_cast<Eigen::Index>(a)) > scores(static_cast<Eigen::Index>(b));
  });

  GatePolicy policy;
  policy.mode = mode;
  policy.deferral_rate = nu;
  policy.calibration_deferred.assign(n, false);
  for (std::size_t i = 0; i < k; ++i) policy.calibration_deferred[order[i]] = true;
  if (k == 0) {
    policy.threshold = scores.maxCoeff() + 1.0;  // above everything
  } else {
    policy.threshold = scores(static_cast<Eigen::Index>(order[k - 1]));
  }
  return policy;
}

GateDecision gate(const GatePolicy& policy, double score) {
  const bool high = score >= policy.threshold;
  if (policy.mode == GateMode::route) return high ? GateDecision::expensive : GateDecision::cheap;
  return high ? GateDecision::defer : GateDecision::explain;
}

StabilityLabel stability_label(double tau) {
  require(tau >= -1.0 - 1e-12 && tau <= 1.0 + 1e-12, "stability_label: tau out of [-1, 1]");
  return tau >= 0.7 ? StabilityLabel::stable : StabilityLabel::unstable;
}

PrecisionRecall precision_recall(const std::vector<bool>& accepted, const std::vector<bool>& stable) {
  require(accepted.size() == stable.size(), "precision_recall: length mismatch");
  long n_accepted = 0, n_stable = 0, n_stable_accepted = 0;
  for (std::size_t i = 0; i < accepted.size(); ++i) {
    if (accepted[i]) ++n_accepted;
    if (stable[i]) ++n_stable;
    if (accepted[i] && stable[i]) ++n_stable_accepted;
  }
  PrecisionRecall pr;
  if (n_accepted > 0) pr.precision = static_cast<double>(n_stable_accepted) / static_cast<double>(n_accepted);
  if (n_stable > 0) pr.recall = static_cast<double>(n_stable_accepted) / static_cast<double>(n_stable);
  return pr;
}

double relative_cost(const CostModel& cost, double nu) {
  require(nu >= 0.0 && nu <= 1.0, "relative_cost: nu must be in [0, 1]");
  require(cost.m >= 1 && cost.d_evals >= 1, "relative_cost: m and d must be >= 1");
  const double numerator = cost.native_ensemble ? 1.0 : static_cast<double>(cost.m);
  return numerator / static_cast<double>(cost.d_evals) + (1.0 - nu);
}

}  // namespace uqxai
