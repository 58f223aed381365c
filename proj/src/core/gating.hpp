#pragma once

#include "common.hpp"

#include <optional>
#include <vector>

namespace uqxai {

enum class GateMode { route, defer };
enum class GateDecision { cheap, expensive, explain, defer };

const char* to_string(GateMode m);
const char* to_string(GateDecision d);

// Percentile-calibrated gate. Exactly the top round(nu * n) calibration
// scores (ties broken by sample index) are marked high-uncertainty; threshold
// carries over to fresh samples, where score >= threshold routes high.
struct GatePolicy {
  double threshold = 0.0;
  double deferral_rate = 0.0;
  GateMode mode = GateMode::defer;
  std::vector<bool> calibration_deferred;  // per calibration sample
};

GatePolicy calibrate_threshold(const Vector& scores, double nu, GateMode mode = GateMode::defer);

// boundary rule: score == threshold counts as high-uncertainty
GateDecision gate(const GatePolicy& policy, double score);

enum class StabilityLabel { stable, unstable };

// stable iff tau >= 0.7
StabilityLabel stability_label(double tau);

struct PrecisionRecall {
  std::optional<double> precision;  // undefined when nothing was accepted
  std::optional<double> recall;     // undefined when nothing is stable
};

// positives = stable among accepted; accepted[i] true = explanation kept
PrecisionRecall precision_recall(const std::vector<bool>& accepted, const std::vector<bool>& stable);

struct CostModel {
  long m = 1;        // model evaluations per uncertainty estimate
  long d_evals = 1;  // model evaluations per explanation
  bool native_ensemble = false;  // uncertainty is a byproduct of inference
};

// q = m/d + (1 - nu), or 1/d + (1 - nu) for native ensembles
double relative_cost(const CostModel& cost, double nu);

}  // namespace uqxai
