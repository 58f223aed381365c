#include "oracle_check.hpp"

#include "attribution.hpp"
#include "dataset.hpp"
#include "mlp.hpp"
#include "stability.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

namespace uqxai {

namespace {

struct Check {
  const char* name;
  double worst;
  double tolerance;
  bool pass;
};

void report(const Check& c, bool verbose, int* failures) {
  if (!c.pass) ++*failures;
  if (verbose) {
    std::printf("%-44s %s  (worst %.3e, tol %.1e)\n", c.name, c.pass ? "ok" : "FAIL", c.worst, c.tolerance);
  }
}

// random forest on random data; small enough for the 2^d oracle
struct SmallForestCase {
  TabularDataset train;
  std::shared_ptr<RandomForest> forest;
  BackgroundSet background;
  Vector query;
};

SmallForestCase make_forest_case(std::uint64_t seed) {
  Rng rng(seed);
  const int d = 2 + static_cast<int>(rng.uniform_int(9));       // 2..10
  const int n = 60 + static_cast<int>(rng.uniform_int(60));
  const int n_trees = 1 + static_cast<int>(rng.uniform_int(5)); // 1..5
  const int b = 2 + static_cast<int>(rng.uniform_int(19));      // 2..20

  SmallForestCase c;
  c.train.schema.name = "oracle_case";
  c.train.schema.n_features = d;
  c.train.schema.n_classes = 2;
  for (int j = 0; j < d; ++j) c.train.schema.feature_names.push_back("x" + std::to_string(j));
  c.train.features.resize(n, d);
  c.train.labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j) {
      c.train.features(i, j) = rng.normal();
      acc += (j % 2 ? 1.0 : -1.0) * c.train.features(i, j);
    }
    c.train.labels[static_cast<std::size_t>(i)] = acc + 0.3 * rng.normal() > 0 ? 1 : 0;
  }

  ForestConfig fc;
  fc.n_trees = n_trees;
  fc.max_depth = 3;
  fc.min_samples_split = 2;
  fc.min_samples_leaf = 1;
  fc.seed = rng.substream(1).seed();
  c.forest = train_random_forest(c.train, fc);
  c.background = BackgroundSet::sample(c.train.features, b, rng.substream(2).seed());
  c.query.resize(d);
  for (int j = 0; j < d; ++j) c.query(j) = rng.normal();
  return c;
}

}  // namespace

int run_oracle_checks(bool verbose) {
  int failures = 0;

  // 1) tree_shap == oracle (1e-9) and full-enumeration kernel_shap == oracle
  //    (1e-6) on 100 random small forests
  {
    double worst_tree = 0.0, worst_kernel = 0.0, worst_eff = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      SmallForestCase c = make_forest_case(777 + static_cast<std::uint64_t>(trial));
      const int target = 1;
      AttributionTarget at{target, OutputKind::probability};
      const auto oracle = exact_shapley_oracle(*c.forest, c.query, c.background, at);
      const auto tree = tree_shap(*c.forest, c.query, c.background, target);
      const auto kernel = kernel_shap(*c.forest, c.query, c.background, at,
                                      (1ll << c.query.size()) - 2, 11 + static_cast<std::uint64_t>(trial));
      worst_tree = std::max(worst_tree, (oracle.values - tree.values).cwiseAbs().maxCoeff());
      worst_kernel = std::max(worst_kernel, (oracle.values - kernel.values).cwiseAbs().maxCoeff());

      const double v_full = interventional_value(*c.forest, c.query, c.background,
                                                 (1ull << c.query.size()) - 1, at);
      const double v_empty = interventional_value(*c.forest, c.query, c.background, 0, at);
      worst_eff = std::max(worst_eff, std::abs(oracle.values.sum() - (v_full - v_empty)));
    }
    report({"tree_shap vs exact oracle", worst_tree, 1e-9, worst_tree < 1e-9}, verbose, &failures);
    report({"kernel_shap (full enumeration) vs oracle", worst_kernel, 1e-6, worst_kernel < 1e-6}, verbose,
           &failures);
    report({"oracle efficiency", worst_eff, 1e-9, worst_eff < 1e-9}, verbose, &failures);
  }

  // 2) MLP input gradients vs central finite differences
  {
    Rng rng(4242);
    Vector w(6);
    for (int j = 0; j < 6; ++j) w(j) = rng.normal();
    const TabularDataset data = synth_linear_dataset(6, 400, w, 99);
    const auto parts = split(data, SplitSpec{0.70, 0.15, 0.15, 7});
    MlpConfig mc;
    mc.hidden = {16, 8};
    mc.max_epochs = 8;
    mc.seed = 5;
    const auto net = train_mlp(parts[0], parts[1], mc);

    double worst = 0.0;
    const double h = 1e-5;
    for (int probe = 0; probe < 20; ++probe) {
      Vector x(6);
      for (int j = 0; j < 6; ++j) x(j) = rng.normal();
      const int target = static_cast<int>(rng.uniform_int(2));
      const Vector grad = net->input_gradient(x, target);
      const int coord = static_cast<int>(rng.uniform_int(6));
      Vector xp = x, xm = x;
      xp(coord) += h;
      xm(coord) -= h;
      const double fd = (net->predict_logits(xp.transpose())(0, target) -
                         net->predict_logits(xm.transpose())(0, target)) /
                        (2 * h);
      const double denom = std::max({std::abs(fd), std::abs(grad(coord)), 1e-8});
      worst = std::max(worst, std::abs(fd - grad(coord)) / denom);
    }
    report({"mlp input gradient vs finite differences", worst, 1e-4, worst < 1e-4}, verbose, &failures);
  }

  // 3) rank metrics vs closed forms on tie-free permutations
  {
    Rng rng(31337);
    double worst_tau = 0.0, worst_rho = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      const int d = 3 + static_cast<int>(rng.uniform_int(10));
      std::vector<double> a(static_cast<std::size_t>(d)), b(static_cast<std::size_t>(d));
      std::iota(a.begin(), a.end(), 1.0);
      std::iota(b.begin(), b.end(), 1.0);
      rng.shuffle(a);
      rng.shuffle(b);
      Vector va(d), vb(d);
      for (int j = 0; j < d; ++j) {
        va(j) = a[static_cast<std::size_t>(j)];
        vb(j) = b[static_cast<std::size_t>(j)];
      }
      // pair enumeration for tau
      double concordant = 0, discordant = 0;
      for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
          const double prod = (va(i) - va(j)) * (vb(i) - vb(j));
          if (prod > 0) ++concordant;
          if (prod < 0) ++discordant;
        }
      }
      const double tau_ref = (concordant - discordant) / (0.5 * d * (d - 1));
      worst_tau = std::max(worst_tau, std::abs(kendall_tau(va, vb) - tau_ref));
      // closed-form rho on ranks
      double sum_sq = 0.0;
      for (int j = 0; j < d; ++j) sum_sq += (va(j) - vb(j)) * (va(j) - vb(j));
      const double rho_ref = 1.0 - 6.0 * sum_sq / (static_cast<double>(d) * (d * d - 1.0));
      const auto rho = spearman_rho(va, vb);
      worst_rho = std::max(worst_rho, rho ? std::abs(*rho - rho_ref) : 1.0);
    }
    report({"kendall tau vs pair enumeration", worst_tau, 1e-12, worst_tau < 1e-12}, verbose, &failures);
    report({"spearman rho vs closed form", worst_rho, 1e-12, worst_rho < 1e-12}, verbose, &failures);
  }

  return failures;
}

}  // namespace uqxai
