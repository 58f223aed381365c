#include "stability.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace uqxai {

Vector average_ranks(const Vector& v) {
  const Eigen::Index n = v.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return v(a) < v(b); });
  Vector ranks(n);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v(order[j + 1]) == v(order[i])) ++j;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks(order[k]) = avg;
    i = j + 1;
  }
  return ranks;
}

double kendall_tau(const Vector& r1, const Vector& r2) {
  require(r1.size() == r2.size(), "kendall_tau: length mismatch");
  const Eigen::Index d = r1.size();
  require(d >= 2, "kendall_tau: need at least 2 entries");

  double concordant = 0, discordant = 0, ties_1 = 0, ties_2 = 0, ties_both = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const double a = r1(i) - r1(j);
      const double b = r2(i) - r2(j);
      if (a == 0.0 && b == 0.0) {
        ++ties_both;
      } else if (a == 0.0) {
        ++ties_1;
      } else if (b == 0.0) {
        ++ties_2;
      } else if (a * b > 0.0) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double n0 = static_cast<double>(d) * (d - 1) / 2.0;
  const double n1 = ties_1 + ties_both;
  const double n2 = ties_2 + ties_both;
  const double denom = std::sqrt((n0 - n1) * (n0 - n2));
  if (denom == 0.0) return 0.0;
  return (concordant - discordant) / denom;
}

std::optional<double> spearman_rho(const Vector& a, const Vector& b) {
  require(a.size() == b.size(), "spearman_rho: length mismatch");
  require(a.size() >= 2, "spearman_rho: need at least 2 entries");
  const Vector ra = average_ranks(a);
  const Vector rb = average_ranks(b);
  const double ma = ra.mean(), mb = rb.mean();
  const Vector ca = ra.array() - ma;
  const Vector cb = rb.array() - mb;
  const double na = ca.norm(), nb = cb.norm();
  if (na == 0.0 || nb == 0.0) return std::nullopt;  // constant input
  return ca.dot(cb) / (na * nb);
}

XdResult explanation_degradation(const ExplainFn& explain, const Matrix& clean,
                                 const std::vector<Matrix>& perturbed_per_seed) {
  std::vector<AttributionVector> clean_attr;
  clean_attr.reserve(static_cast<std::size_t>(clean.rows()));
  for (Eigen::Index i = 0; i < clean.rows(); ++i) {
    clean_attr.push_back(explain(clean.row(i).transpose()));
  }
  return explanation_degradation_from_clean(explain, clean_attr, perturbed_per_seed);
}

XdResult explanation_degradation_from_clean(const ExplainFn& explain,
                                            const std::vector<AttributionVector>& clean_attr,
                                            const std::vector<Matrix>& perturbed_per_seed) {
  require(!perturbed_per_seed.empty(), "explanation_degradation: no perturbed batches");
  const Eigen::Index n = static_cast<Eigen::Index>(clean_attr.size());
  for (const auto& batch : perturbed_per_seed) {
    require(batch.rows() == n, "explanation_degradation: perturbed batch size mismatch");
  }

  XdResult out;
  double acc = 0.0;
  long counted = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector clean_ranks = abs_ranking(clean_attr[static_cast<std::size_t>(i)].values);
    bool failed = false;
    double sample_acc = 0.0;
    for (const auto& batch : perturbed_per_seed) {
      try {
        const AttributionVector pert = explain(batch.row(i).transpose());
        sample_acc += kendall_tau(clean_ranks, abs_ranking(pert.values));
      } catch (const Error&) {
        failed = true;
        break;
      }
    }
    if (failed) {
      ++out.excluded;
      continue;
    }
    acc += sample_acc / static_cast<double>(perturbed_per_seed.size());
    ++counted;
  }
  require(counted > 0, "explanation_degradation: every sample was excluded");
  out.value = acc / static_cast<double>(counted);
  return out;
}

EgResult epistemic_growth(const Vector& clean_scores, const Vector& perturbed_scores) {
  require(clean_scores.size() == perturbed_scores.size() && clean_scores.size() > 0,
          "epistemic_growth: score length mismatch");
  EgResult out;
  const double clean_sum = clean_scores.sum();
  if (clean_sum > 0.0) {
    out.value = perturbed_scores.sum() / clean_sum;
    out.ratio_form = true;
  } else {
    out.value = perturbed_scores.mean();  // absolute-mean fallback, flagged
    out.ratio_form = false;
  }
  return out;
}

std::optional<double> xec(const SweepCurve& curve) {
  require(curve.levels.size() == curve.xd.size() && curve.levels.size() == curve.eg.size(),
          "xec: curve arrays disagree in length");
  require(curve.levels.size() >= 3, "xec: need at least 3 levels");
  Vector xd(static_cast<Eigen::Index>(curve.xd.size()));
  Vector eg(static_cast<Eigen::Index>(curve.eg.size()));
  for (std::size_t i = 0; i < curve.xd.size(); ++i) {
    xd(static_cast<Eigen::Index>(i)) = curve.xd[i];
    eg(static_cast<Eigen::Index>(i)) = curve.eg[i];
  }
  return spearman_rho(xd, eg);
}

}  // namespace uqxai
