#include "attribution.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>

namespace uqxai {

namespace {

constexpr int kMaxOracleFeatures = 16;
constexpr int kMaxBinomial = 128;

// exact binomial table, C[n][k] for n < kMaxBinomial
const double* binomial_row(int n) {
  static const auto table = [] {
    auto t = std::make_unique<std::array<std::array<double, kMaxBinomial>, kMaxBinomial>>();
    for (int i = 0; i < kMaxBinomial; ++i) {
      (*t)[i][0] = 1.0;
      for (int j = 1; j <= i; ++j) {
        (*t)[i][j] = (*t)[i - 1][j - 1] + (i - 1 >= j ? (*t)[i - 1][j] : 0.0);
      }
      for (int j = i + 1; j < kMaxBinomial; ++j) (*t)[i][j] = 0.0;
    }
    return t;
  }();
  return (*table)[n].data();
}

double output_scalar(const Matrix& proba_or_logits, Eigen::Index row, const AttributionTarget& target) {
  return proba_or_logits(row, target.target_class);
}

Matrix model_output_matrix(const ProbabilisticClassifier& model, const Matrix& x, OutputKind kind) {
  return kind == OutputKind::probability ? model.predict_proba(x) : model.predict_logits(x);
}

}  // namespace

const char* to_string(AttributionMethod m) {
  switch (m) {
    case AttributionMethod::kernel_shap: return "kernel_shap";
    case AttributionMethod::tree_shap: return "tree_shap";
    case AttributionMethod::lime: return "lime";
    case AttributionMethod::ig: return "ig";
    case AttributionMethod::smoothgrad: return "smoothgrad";
    case AttributionMethod::smooth_ig: return "smooth_ig";
    case AttributionMethod::exact_shapley: return "exact_shapley";
  }
  return "?";
}

AttributionMethod attribution_method_from_string(const std::string& name) {
  if (name == "kernel_shap") return AttributionMethod::kernel_shap;
  if (name == "tree_shap") return AttributionMethod::tree_shap;
  if (name == "lime") return AttributionMethod::lime;
  if (name == "ig") return AttributionMethod::ig;
  if (name == "smoothgrad") return AttributionMethod::smoothgrad;
  if (name == "smooth_ig") return AttributionMethod::smooth_ig;
  if (name == "exact_shapley") return AttributionMethod::exact_shapley;
  fail("unknown attribution method: " + name);
}

BackgroundSet BackgroundSet::sample(const Matrix& train_features, int b, std::uint64_t seed) {
  require(train_features.rows() > 0, "background: empty training features");
  Rng rng(seed);
  const int n = static_cast<int>(train_features.rows());
  BackgroundSet bg;
  if (b >= n) {
    bg.rows = train_features;
    return bg;
  }
  const auto idx = rng.sample_without_replacement(static_cast<std::size_t>(n), static_cast<std::size_t>(b));
  bg.rows.resize(b, train_features.cols());
  for (int i = 0; i < b; ++i) bg.rows.row(i) = train_features.row(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]));
  return bg;
}

double interventional_value(const ProbabilisticClassifier& model, const Vector& x,
                            const BackgroundSet& background, std::uint64_t mask,
                            const AttributionTarget& target, long* eval_counter) {
  const Eigen::Index b = background.size();
  const Eigen::Index d = x.size();
  Matrix composite = background.rows;
  for (Eigen::Index j = 0; j < d; ++j) {
    if (mask >> j & 1u) composite.col(j).setConstant(x(j));
  }
  if (eval_counter) *eval_counter += static_cast<long>(b);
  const Matrix out = model_output_matrix(model, composite, target.output);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) acc += output_scalar(out, i, target);
  return acc / static_cast<double>(b);
}

AttributionVector exact_shapley_oracle(const ProbabilisticClassifier& model, const Vector& x,
                                       const BackgroundSet& background, const AttributionTarget& target) {
  const int d = static_cast<int>(x.size());
  require(d >= 1 && d <= kMaxOracleFeatures,
          "exact_shapley_oracle: d = " + std::to_string(d) + " exceeds the enumeration limit of " +
              std::to_string(kMaxOracleFeatures));
  require(background.size() > 0, "exact_shapley_oracle: empty background");

  AttributionVector result;
  result.method = AttributionMethod::exact_shapley;
  result.target_class = target.target_class;
  result.values = Vector::Zero(d);

  const std::uint64_t n_masks = 1ull << d;
  std::vector<double> value(n_masks);
  for (std::uint64_t mask = 0; mask < n_masks; ++mask) {
    value[mask] = interventional_value(model, x, background, mask, target, &result.model_evals);
  }

  // phi_i = sum over S not containing i of |S|!(d-|S|-1)!/d! * (v(S+i) - v(S))
  std::vector<double> factorial(static_cast<std::size_t>(d) + 1, 1.0);
  for (int i = 1; i <= d; ++i) factorial[static_cast<std::size_t>(i)] = factorial[static_cast<std::size_t>(i - 1)] * i;
  for (std::uint64_t mask = 0; mask < n_masks; ++mask) {
    const int s = static_cast<int>(__builtin_popcountll(mask));
    if (s == d) continue;
    const double weight = factorial[static_cast<std::size_t>(s)] * factorial[static_cast<std::size_t>(d - s - 1)] /
                          factorial[static_cast<std::size_t>(d)];
    for (int i = 0; i < d; ++i) {
      if (mask >> i & 1u) continue;
      result.values(i) += weight * (value[mask | (1ull << i)] - value[mask]);
    }
  }
  return result;
}

AttributionVector kernel_shap(const ProbabilisticClassifier& model, const Vector& x,
                              const BackgroundSet& background, const AttributionTarget& target,
                              long n_coalitions, std::uint64_t seed) {
  const int d = static_cast<int>(x.size());
  require(d >= 1, "kernel_shap: no features");
  require(background.size() > 0, "kernel_shap: empty background");

  AttributionVector result;
  result.method = AttributionMethod::kernel_shap;
  result.target_class = target.target_class;

  const double v_empty = interventional_value(model, x, background, 0, target, &result.model_evals);
  const std::uint64_t full = d >= 64 ? ~0ull : (1ull << d) - 1;
  const double v_full = interventional_value(model, x, background, full, target, &result.model_evals);
  const double delta = v_full - v_empty;

  if (d == 1) {
    result.values = Vector::Constant(1, delta);
    return result;
  }

  // coalition masks and their regression weights
  std::vector<std::uint64_t> masks;
  std::vector<double> weights;
  auto kernel_weight = [&](int s) {
    return static_cast<double>(d - 1) / (binomial_row(d)[s] * s * (d - s));
  };

  const std::uint64_t max_enumerable = d < 63 ? (1ull << d) - 2 : ~0ull;
  if (static_cast<std::uint64_t>(n_coalitions) >= max_enumerable) {
    for (std::uint64_t mask = 1; mask < full; ++mask) {
      masks.push_back(mask);
      weights.push_back(kernel_weight(static_cast<int>(__builtin_popcountll(mask))));
    }
  } else {
    require(n_coalitions >= 2 * d, "kernel_shap: coalition budget below 2d");
    for (int i = 0; i < d; ++i) {
      masks.push_back(1ull << i);
      weights.push_back(kernel_weight(1));
      masks.push_back(full ^ (1ull << i));
      weights.push_back(kernel_weight(d - 1));
    }
    // remaining budget: sizes 2..d-2 sampled with probability proportional to
    // the total kernel mass of each size
    const long remaining = n_coalitions - 2 * d;
    if (remaining > 0 && d >= 4) {
      std::vector<double> size_mass;
      double total_mass = 0.0;
      for (int s = 2; s <= d - 2; ++s) {
        const double mass = static_cast<double>(d - 1) / (s * (d - s));  // kernel * count
        size_mass.push_back(mass);
        total_mass += mass;
      }
      Rng rng(seed);
      std::map<std::uint64_t, double> sampled;
      const double per_draw = total_mass / static_cast<double>(remaining);
      for (long i = 0; i < remaining; ++i) {
        double u = rng.uniform() * total_mass;
        int s = 2;
        for (std::size_t k = 0; k < size_mass.size(); ++k) {
          if (u < size_mass[k] || k + 1 == size_mass.size()) {
            s = 2 + static_cast<int>(k);
            break;
          }
          u -= size_mass[k];
        }
        const auto chosen = rng.sample_without_replacement(static_cast<std::size_t>(d), static_cast<std::size_t>(s));
        std::uint64_t mask = 0;
        for (auto j : chosen) mask |= 1ull << j;
        sampled[mask] += per_draw;
      }
      for (const auto& [mask, w] : sampled) {
        masks.push_back(mask);
        weights.push_back(w);
      }
    }
  }

  const std::size_t m = masks.size();
  Vector y(m);
  for (std::size_t i = 0; i < m; ++i) {
    y(static_cast<Eigen::Index>(i)) =
        interventional_value(model, x, background, masks[i], target, &result.model_evals);
  }

  // eliminate the efficiency constraint: phi_d = delta - sum_{j<d} phi_j
  Matrix design(m, d - 1);
  Vector rhs(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double z_last = masks[i] >> (d - 1) & 1u ? 1.0 : 0.0;
    for (int j = 0; j + 1 < d; ++j) {
      const double z_j = masks[i] >> j & 1u ? 1.0 : 0.0;
      design(static_cast<Eigen::Index>(i), j) = z_j - z_last;
    }
    rhs(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(i)) - v_empty - z_last * delta;
  }

  Matrix ata = Matrix::Zero(d - 1, d - 1);
  Vector atb = Vector::Zero(d - 1);
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = design.row(static_cast<Eigen::Index>(i));
    ata.noalias() += weights[i] * row.transpose() * row;
    atb.noalias() += weights[i] * rhs(static_cast<Eigen::Index>(i)) * row.transpose();
  }

  Eigen::LDLT<Matrix> solver(ata);
  Vector head;
  bool stabilized = false;
  if (solver.info() == Eigen::Success && solver.isPositive() && (ata * solver.solve(atb) - atb).norm() <= 1e-8 * (1.0 + atb.norm())) {
    head = solver.solve(atb);
  } else {
    const double ridge = 1e-8 * (1.0 + ata.trace() / static_cast<double>(d - 1));
    Matrix reg = ata + ridge * Matrix::Identity(d - 1, d - 1);
    head = Eigen::LDLT<Matrix>(reg).solve(atb);
    stabilized = true;
  }

  result.values = Vector::Zero(d);
  result.values.head(d - 1) = head;
  result.values(d - 1) = delta - head.sum();
  result.ridge_stabilized = stabilized;
  return result;
}

namespace {

// Per (tree, background row) recursion. Each decision node is visited at most
// once; x_set / z_set hold the features fixed to x's or z's branch on the way
// down (at most depth entries, so linear membership scans are cheap and the
// feature count is unbounded). Leaves contribute closed-form ordering weights:
//   i fixed to x: + leaf / (a * C(a+b, a))
//   i fixed to z: - leaf / (b * C(a+b, b))
// with a = |x_set|, b = |z_set|.
struct TreePathShap {
  const std::vector<TreeNode>& nodes;
  const Vector& x;
  const Vector& z;
  int target_class;
  Vector* phi;
  std::vector<int> x_set, z_set;  // path state, push/pop around recursion

  static bool contains(const std::vector<int>& set, int feature) {
    for (int f : set) {
      if (f == feature) return true;
    }
    return false;
  }

  void leaf_contribution(double leaf) {
    if (leaf == 0.0) return;
    const int a = static_cast<int>(x_set.size());
    const int b = static_cast<int>(z_set.size());
    if (a > 0) {
      const double w = leaf / (static_cast<double>(a) * binomial_row(a + b)[a]);
      for (int j : x_set) (*phi)(j) += w;
    }
    if (b > 0) {
      const double w = leaf / (static_cast<double>(b) * binomial_row(a + b)[b]);
      for (int j : z_set) (*phi)(j) -= w;
    }
  }

  void walk(int node_id) {
    const TreeNode& node = nodes[static_cast<std::size_t>(node_id)];
    if (node.feature < 0) {
      leaf_contribution(node.class_freq(target_class));
      return;
    }

    const int x_child = x(node.feature) <= node.threshold ? node.left : node.right;
    const int z_child = z(node.feature) <= node.threshold ? node.left : node.right;
    if (contains(x_set, node.feature)) {
      walk(x_child);
    } else if (contains(z_set, node.feature)) {
      walk(z_child);
    } else if (x_child == z_child) {
      walk(x_child);
    } else {
      x_set.push_back(node.feature);
      walk(x_child);
      x_set.pop_back();
      z_set.push_back(node.feature);
      walk(z_child);
      z_set.pop_back();
    }
  }
};

}  // namespace

AttributionVector tree_shap(const RandomForest& forest, const Vector& x, const BackgroundSet& background,
                            int target_class) {
  const int d = static_cast<int>(x.size());
  require(d == forest.n_features(), "tree_shap: feature count mismatch");
  require(background.size() > 0, "tree_shap: empty background");
  require(target_class >= 0 && target_class < forest.n_classes(), "tree_shap: target class out of range");

  AttributionVector result;
  result.method = AttributionMethod::tree_shap;
  result.target_class = target_class;
  result.values = Vector::Zero(d);

  Vector phi = Vector::Zero(d);
  for (const auto& tree : forest.trees()) {
    for (Eigen::Index r = 0; r < background.size(); ++r) {
      const Vector z = background.rows.row(r).transpose();
      TreePathShap walker{tree.nodes(), x, z, target_class, &phi, {}, {}};
      walker.walk(0);
      ++result.model_evals;  // one path evaluation per (tree, background row)
    }
  }
  result.values = phi / static_cast<double>(forest.trees().size() * background.size());
  return result;
}

AttributionVector lime(const ProbabilisticClassifier& model, const Vector& x, const Vector& train_stds,
                       int target_class, const LimeConfig& config, std::uint64_t seed) {
  const int d = static_cast<int>(x.size());
  require(train_stds.size() == d, "lime: train std length mismatch");
  require(config.n_samples >= d + 1, "lime: too few samples");

  Rng rng(seed);
  Matrix z(config.n_samples, d);  // offsets from x
  for (long i = 0; i < config.n_samples; ++i) {
    for (int j = 0; j < d; ++j) z(i, j) = rng.normal() * train_stds(j);
  }
  // degenerate sampling guard (all perturbations identical)
  require((z.rowwise() - z.row(0)).cwiseAbs().maxCoeff() > 0.0, "lime: degenerate perturbations");

  Matrix queries = z.rowwise() + x.transpose();
  const Matrix proba = model.predict_proba(queries);
  Vector f = proba.col(target_class);

  // exponential kernel on standardized distance
  const double sigma_k = config.kernel_width_scale * std::sqrt(static_cast<double>(d));
  Vector w(config.n_samples);
  for (long i = 0; i < config.n_samples; ++i) {
    double dist_sq = 0.0;
    for (int j = 0; j < d; ++j) {
      const double s = train_stds(j) > 0 ? train_stds(j) : 1.0;
      const double u = z(i, j) / s;
      dist_sq += u * u;
    }
    w(i) = std::exp(-dist_sq / (sigma_k * sigma_k));
  }

  // weighted ridge on [z, 1]; the intercept column is unpenalized
  Matrix a = Matrix::Zero(d + 1, d + 1);
  Vector b = Vector::Zero(d + 1);
  Vector row(d + 1);
  for (long i = 0; i < config.n_samples; ++i) {
    row.head(d) = z.row(i).transpose();
    row(d) = 1.0;
    a.noalias() += w(i) * row * row.transpose();
    b.noalias() += w(i) * f(i) * row;
  }
  a.topLeftCorner(d, d).diagonal().array() += config.ridge;
  Vector coef = Eigen::LDLT<Matrix>(a).solve(b);

  AttributionVector result;
  result.method = AttributionMethod::lime;
  result.target_class = target_class;
  result.model_evals = config.n_samples;
  result.values = coef.head(d);

  // zero everything outside the top_k magnitudes, remember what was kept
  result.topk_mask.assign(static_cast<std::size_t>(d), true);
  if (config.top_k > 0 && config.top_k < d) {
    std::vector<int> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int lhs, int rhs) {
      const double la = std::abs(result.values(lhs)), ra = std::abs(result.values(rhs));
      if (la != ra) return la > ra;
      return lhs < rhs;
    });
    for (int r = config.top_k; r < d; ++r) {
      result.values(order[static_cast<std::size_t>(r)]) = 0.0;
      result.topk_mask[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = false;
    }
  }
  return result;
}

AttributionVector integrated_gradients(const ProbabilisticClassifier& model, const Vector& x,
                                       const Vector& baseline, int steps, int target_class) {
  require(model.capabilities().has_gradients, model.kind() + ": gradient capability absent");
  require(steps >= 1, "integrated_gradients: steps must be positive");
  require(baseline.size() == x.size(), "integrated_gradients: baseline length mismatch");

  const Vector path = x - baseline;
  Vector acc = Vector::Zero(x.size());
  for (int t = 0; t < steps; ++t) {
    const double alpha = (static_cast<double>(t) + 0.5) / static_cast<double>(steps);
    acc += model.input_gradient(baseline + alpha * path, target_class);
  }
  AttributionVector result;
  result.method = AttributionMethod::ig;
  result.target_class = target_class;
  result.model_evals = steps;
  result.values = path.cwiseProduct(acc / static_cast<double>(steps));
  return result;
}

AttributionVector vanilla_gradient(const ProbabilisticClassifier& model, const Vector& x, int target_class) {
  AttributionVector result;
  result.method = AttributionMethod::smoothgrad;
  result.target_class = target_class;
  result.model_evals = 1;
  result.values = model.input_gradient(x, target_class);
  return result;
}

AttributionVector smooth(const ProbabilisticClassifier& model, const Vector& x, int target_class,
                         const SmoothConfig& config, std::uint64_t seed) {
  require(config.n_noise >= 1, "smooth: n_noise must be positive");
  AttributionVector result;
  result.method = config.base == SmoothBase::vanilla_gradient ? AttributionMethod::smoothgrad
                                                              : AttributionMethod::smooth_ig;
  result.target_class = target_class;
  result.values = Vector::Zero(x.size());

  const Vector zero = Vector::Zero(x.size());
  for (int n = 0; n < config.n_noise; ++n) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(n)));
    Vector noisy = x;
    for (Eigen::Index j = 0; j < x.size(); ++j) noisy(j) += config.sigma * rng.normal();
    if (config.base == SmoothBase::vanilla_gradient) {
      const auto base = vanilla_gradient(model, noisy, target_class);
      result.values += base.values;
      result.model_evals += base.model_evals;
    } else {
      const auto base = integrated_gradients(model, noisy, zero, config.ig_steps, target_class);
      result.values += base.values;
      result.model_evals += base.model_evals;
    }
  }
  result.values /= static_cast<double>(config.n_noise);
  return result;
}

Vector abs_ranking(const Vector& phi) {
  const Eigen::Index d = phi.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return std::abs(phi(a)) < std::abs(phi(b)); });
  Vector ranks(d);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && std::abs(phi(order[j + 1])) == std::abs(phi(order[i]))) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks(order[k]) = avg_rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace uqxai
