#pragma once

#include "attribution.hpp"
#include "common.hpp"

#include <functional>
#include <optional>

namespace uqxai {

// Tie-corrected (tau-b) Kendall coefficient between two rank vectors; equals
// (C - D) / C(d,2) when no ties exist. 0 when either vector is all ties.
double kendall_tau(const Vector& r1, const Vector& r2);

// Average-rank Spearman correlation; matches the 1 - 6*sum(d^2)/(d(d^2-1))
// closed form on tie-free inputs. Undefined (nullopt) on constant input.
std::optional<double> spearman_rho(const Vector& a, const Vector& b);

// rank helper shared by the metrics: ascending, average ranks on ties
Vector average_ranks(const Vector& v);

struct SweepCurve {
  std::vector<double> levels;
  std::vector<double> xd;
  std::vector<double> eg;
};

struct XdResult {
  double value = 0.0;
  int excluded = 0;  // samples whose explainer failed; never silently dropped
};

using ExplainFn = std::function<AttributionVector(const Vector& x)>;

// Mean Kendall tau between |attribution| rankings of clean rows and their
// perturbed counterparts, over samples and perturbation seeds.
XdResult explanation_degradation(const ExplainFn& explain, const Matrix& clean,
                                 const std::vector<Matrix>& perturbed_per_seed);

// same averaging, starting from precomputed clean attributions
XdResult explanation_degradation_from_clean(const ExplainFn& explain,
                                            const std::vector<AttributionVector>& clean_attr,
                                            const std::vector<Matrix>& perturbed_per_seed);

struct EgResult {
  double value = 1.0;
  bool ratio_form = true;  // false = absolute-mean fallback (zero clean mass)
};

EgResult epistemic_growth(const Vector& clean_scores, const Vector& perturbed_scores);

// Spearman rho of XD against EG across perturbation levels; needs >= 3 levels
// and is undefined when either sequence is constant.
std::optional<double> xec(const SweepCurve& curve);

}  // namespace uqxai
