#pragma once

#include "common.hpp"
#include "model.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace uqxai {

enum class PerturbationKind { gaussian, missing, permute, bim, pgd, cw };

const char* to_string(PerturbationKind k);
PerturbationKind perturbation_kind_from_string(const std::string& name);

struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::gaussian;
  double level = 0.0;  // sigma / p / f / eps / c, by kind
  std::uint64_t seed = 0;
};

// x~ = x + sigma * std(X_j) * eps, per-feature std computed on the batch
// itself (population). Constant features stay put.
Matrix gaussian_noise(const Matrix& x, double sigma, std::uint64_t seed);

struct MissingValueReport {
  long masked = 0;
  bool used_train_fallback = false;  // some column was fully masked
};

// Entries masked i.i.d. with probability p, imputed with the per-feature
// median of the batch's unmasked entries; a fully masked column falls back to
// the training median and the report flags it.
Matrix missing_values(const Matrix& x, double p, std::uint64_t seed, const Vector& train_medians,
                      MissingValueReport* report = nullptr);

// ceil(f * d) columns chosen uniformly, each shuffled across rows.
Matrix permute_features(const Matrix& x, double fraction, std::uint64_t seed);

Vector column_medians(const Matrix& x);

struct AttackConfig {
  int bim_iters = 10;
  double bim_step_scale = 0.25;    // alpha = scale * eps
  int pgd_iters = 20;
  double pgd_step_scale = 0.125;
  bool pgd_random_start = true;
  int cw_iters = 100;
  double cw_lr = 0.01;
  double cw_kappa = 0.0;
  bool target_true_label = false;  // default: attack the model's own prediction
};

// Iterative signed-gradient ascent on the cross-entropy of the given label,
// projected into the l-inf ball of radius eps after every step.
Vector bim_attack(const ProbabilisticClassifier& model, const Vector& x, int label, double eps,
                  const AttackConfig& cfg);

// Same ascent with a uniform random start inside the ball; single restart.
Vector pgd_attack(const ProbabilisticClassifier& model, const Vector& x, int label, double eps,
                  const AttackConfig& cfg, std::uint64_t seed);

struct CwResult {
  Vector x_adv;
  double best_objective = 0.0;
  double l2 = 0.0;  // achieved ||delta||_2
};

// Untargeted l2 attack: minimize ||delta||^2 + c * max(Z_y - max_{j!=y} Z_j,
// -kappa) by adaptive-moment descent on delta, keeping the best iterate.
CwResult cw_attack(const ProbabilisticClassifier& model, const Vector& x, int label, double c,
                   const AttackConfig& cfg);

// batch helpers used by the experiment runners; label per row
Matrix attack_batch(const ProbabilisticClassifier& model, const Matrix& x, const std::vector<int>& labels,
                    const PerturbationSpec& spec, const AttackConfig& cfg);

}  // namespace uqxai
