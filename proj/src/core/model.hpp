#pragma once

#include "common.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace uqxai {

struct Capabilities {
  bool has_members = false;
  bool has_gradients = false;
  bool has_logits = false;
};

// Trained classifier surface shared by every model family. predict_proba rows
// sum to 1 within 1e-6; per_member_proba exists only when has_members (the
// member mean equals predict_proba for forests and bootstrap ensembles);
// input_gradient differentiates the target-class logit and exists only when
// has_gradients.
class ProbabilisticClassifier {
 public:
  virtual ~ProbabilisticClassifier() = default;

  virtual std::string kind() const = 0;
  virtual int n_features() const = 0;
  virtual int n_classes() const = 0;
  virtual Capabilities capabilities() const = 0;

  virtual Matrix predict_proba(const Matrix& x) const = 0;

  virtual Matrix predict_logits(const Matrix& x) const {
    (void)x;
    fail(kind() + ": logits capability absent");
  }

  // [member](n x K); MC-dropout models draw a fresh seeded member set per call
  virtual std::vector<Matrix> per_member_proba(const Matrix& x, std::uint64_t seed) const {
    (void)seed;
    fail(kind() + ": no ensemble members; use the surrogate uncertainty path");
  }

  virtual int member_count() const { return 0; }

  // d(logit of target_class)/dx at x, deterministic (eval mode)
  virtual Vector input_gradient(const Vector& x, int target_class) const {
    (void)x, (void)target_class;
    fail(kind() + ": gradient capability absent");
  }

  // d(cross-entropy(x, label))/dx composed from per-class logit gradients;
  // overridden where one backward pass does the job
  virtual Vector cross_entropy_input_gradient(const Vector& x, int label) const;

  std::vector<int> predict(const Matrix& x) const;
};

using ModelPtr = std::shared_ptr<const ProbabilisticClassifier>;

// softmax over rows, numerically shifted
Matrix softmax_rows(const Matrix& logits);

}  // namespace uqxai
