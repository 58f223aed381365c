#include "perturb.hpp"

#include "rng.hpp"

#include <algorithm>
#include <cmath>

namespace uqxai {

const char* to_string(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::gaussian: return "gaussian";
    case PerturbationKind::missing: return "missing";
    case PerturbationKind::permute: return "permute";
    case PerturbationKind::bim: return "bim";
    case PerturbationKind::pgd: return "pgd";
    case PerturbationKind::cw: return "cw";
  }
  return "?";
}

PerturbationKind perturbation_kind_from_string(const std::string& name) {
  if (name == "gaussian") return PerturbationKind::gaussian;
  if (name == "missing") return PerturbationKind::missing;
  if (name == "permute") return PerturbationKind::permute;
  if (name == "bim") return PerturbationKind::bim;
  if (name == "pgd") return PerturbationKind::pgd;
  if (name == "cw") return PerturbationKind::cw;
  fail("unknown perturbation kind: " + name);
}

Matrix gaussian_noise(const Matrix& x, double sigma, std::uint64_t seed) {
  require(x.rows() > 0, "gaussian_noise: empty input");
  Vector stds(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double mean = x.col(j).mean();
    stds(j) = std::sqrt((x.col(j).array() - mean).square().mean());
  }
  Rng rng(seed);
  Matrix out = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      out(i, j) += sigma * stds(j) * rng.normal();
    }
  }
  return out;
}

Vector column_medians(const Matrix& x) {
  Vector med(x.cols());
  std::vector<double> col(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) col[static_cast<std::size_t>(i)] = x(i, j);
    std::sort(col.begin(), col.end());
    const std::size_t n = col.size();
    med(j) = n % 2 == 1 ? col[n / 2] : 0.5 * (col[n / 2 - 1] + col[n / 2]);
  }
  return med;
}

Matrix missing_values(const Matrix& x, double p, std::uint64_t seed, const Vector& train_medians,
                      MissingValueReport* report) {
  require(p >= 0.0 && p <= 1.0, "missing_values: p must be in [0, 1]");
  require(train_medians.size() == x.cols(), "missing_values: train median length mismatch");
  Rng rng(seed);
  std::vector<std::vector<bool>> mask(static_cast<std::size_t>(x.rows()),
                                      std::vector<bool>(static_cast<std::size_t>(x.cols()), false));
  long masked = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (rng.uniform() < p) {
        mask[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = true;
        ++masked;
      }
    }
  }

  Matrix out = x;
  bool fallback = false;
  std::vector<double> kept;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    kept.clear();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (!mask[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) kept.push_back(x(i, j));
    }
    double fill;
    if (kept.empty()) {
      fill = train_medians(j);
      fallback = true;
    } else {
      std::sort(kept.begin(), kept.end());
      const std::size_t n = kept.size();
      fill = n % 2 == 1 ? kept[n / 2] : 0.5 * (kept[n / 2 - 1] + kept[n / 2]);
    }
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (mask[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) out(i, j) = fill;
    }
  }
  if (report) {
    report->masked = masked;
    report->used_train_fallback = fallback;
  }
  return out;
}

Matrix permute_features(const Matrix& x, double fraction, std::uint64_t seed) {
  require(fraction >= 0.0 && fraction <= 1.0, "permute_features: fraction must be in [0, 1]");
  require(x.rows() >= 2, "permute_features: need at least 2 rows");
  if (fraction == 0.0) return x;
  const int d = static_cast<int>(x.cols());
  const int n_permute = static_cast<int>(std::ceil(fraction * static_cast<double>(d) - 1e-12));
  Rng rng(seed);
  const auto chosen = rng.sample_without_replacement(static_cast<std::size_t>(d), static_cast<std::size_t>(n_permute));
  Matrix out = x;
  std::vector<std::size_t> order(static_cast<std::size_t>(x.rows()));
  for (std::size_t col : chosen) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      out(i, static_cast<Eigen::Index>(col)) = x(static_cast<Eigen::Index>(order[static_cast<std::size_t>(i)]),
                                                 static_cast<Eigen::Index>(col));
    }
  }
  return out;
}

namespace {

Vector clamp_to_ball(const Vector& x_adv, const Vector& x, double eps) {
  return x + (x_adv - x).cwiseMax(-eps).cwiseMin(eps);
}

Vector signed_gradient_ascent(const ProbabilisticClassifier& model, const Vector& x, const Vector& start,
                              int label, double eps, double alpha, int iters) {
  Vector x_adv = start;
  for (int it = 0; it < iters; ++it) {
    const Vector g = model.cross_entropy_input_gradient(x_adv, label);
    for (Eigen::Index j = 0; j < x_adv.size(); ++j) {
      const double s = g(j) > 0.0 ? 1.0 : (g(j) < 0.0 ? -1.0 : 0.0);
      x_adv(j) += alpha * s;
    }
    x_adv = clamp_to_ball(x_adv, x, eps);
  }
  return x_adv;
}

}  // namespace

Vector bim_attack(const ProbabilisticClassifier& model, const Vector& x, int label, double eps,
                  const AttackConfig& cfg) {
  require(model.capabilities().has_gradients, model.kind() + ": gradient capability absent");
  require(eps >= 0.0, "bim_attack: eps must be nonnegative");
  if (eps == 0.0) return x;
  return signed_gradient_ascent(model, x, x, label, eps, cfg.bim_step_scale * eps, cfg.bim_iters);
}

Vector pgd_attack(const ProbabilisticClassifier& model, const Vector& x, int label, double eps,
                  const AttackConfig& cfg, std::uint64_t seed) {
  require(model.capabilities().has_gradients, model.kind() + ": gradient capability absent");
  require(eps >= 0.0, "pgd_attack: eps must be nonnegative");
  if (eps == 0.0) return x;
  Vector start = x;
  if (cfg.pgd_random_start) {
    Rng rng(seed);
    for (Eigen::Index j = 0; j < start.size(); ++j) start(j) += rng.uniform(-eps, eps);
  }
  return signed_gradient_ascent(model, x, start, label, eps, cfg.pgd_step_scale * eps, cfg.pgd_iters);
}

CwResult cw_attack(const ProbabilisticClassifier& model, const Vector& x, int label, double c,
                   const AttackConfig& cfg) {
  require(model.capabilities().has_gradients, model.kind() + ": gradient capability absent");
  const Eigen::Index d = x.size();
  const int k = model.n_classes();

  auto margin_and_runner_up = [&](const Vector& q, int* runner_up) {
    const Matrix logits = model.predict_logits(q.transpose());
    double best = -std::numeric_limits<double>::infinity();
    int arg = -1;
    for (int j = 0; j < k; ++j) {
      if (j == label) continue;
      if (logits(0, j) > best) {
        best = logits(0, j);
        arg = j;
      }
    }
    if (runner_up) *runner_up = arg;
    return logits(0, label) - best;  // positive while still classified as label
  };

  Vector delta = Vector::Zero(d);
  Vector m = Vector::Zero(d), v = Vector::Zero(d);
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

  auto objective = [&](const Vector& dlt, int* runner_up) {
    const double margin = margin_and_runner_up(x + dlt, runner_up);
    return dlt.squaredNorm() + c * std::max(margin, -cfg.cw_kappa);
  };

  CwResult best;
  best.x_adv = x;
  best.best_objective = objective(delta, nullptr);
  best.l2 = 0.0;

  for (int it = 1; it <= cfg.cw_iters; ++it) {
    int runner_up = -1;
    const double margin = margin_and_runner_up(x + delta, &runner_up);
    Vector grad = 2.0 * delta;
    if (margin > -cfg.cw_kappa && runner_up >= 0) {
      grad += c * (model.input_gradient(x + delta, label) - model.input_gradient(x + delta, runner_up));
    }
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.array().square().matrix();
    const double c1 = 1.0 - std::pow(beta1, it);
    const double c2 = 1.0 - std::pow(beta2, it);
    delta.array() -= cfg.cw_lr * (m.array() / c1) / ((v.array() / c2).sqrt() + adam_eps);

    const double obj = objective(delta, nullptr);
    if (obj < best.best_objective) {
      best.best_objective = obj;
      best.x_adv = x + delta;
      best.l2 = delta.norm();
    }
  }
  return best;
}

Matrix attack_batch(const ProbabilisticClassifier& model, const Matrix& x, const std::vector<int>& labels,
                    const PerturbationSpec& spec, const AttackConfig& cfg) {
  require(static_cast<std::size_t>(x.rows()) == labels.size(), "attack_batch: label count mismatch");
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Vector xi = x.row(i).transpose();
    const int yi = labels[static_cast<std::size_t>(i)];
    Vector adv;
    switch (spec.kind) {
      case PerturbationKind::bim:
        adv = bim_attack(model, xi, yi, spec.level, cfg);
        break;
      case PerturbationKind::pgd:
        adv = pgd_attack(model, xi, yi, spec.level, cfg, Rng::derive(spec.seed, static_cast<std::uint64_t>(i)));
        break;
      case PerturbationKind::cw:
        adv = cw_attack(model, xi, yi, spec.level, cfg).x_adv;
        break;
      default:
        fail("attack_batch: not an attack kind");
    }
    out.row(i) = adv.transpose();
  }
  return out;
}

}  // namespace uqxai
