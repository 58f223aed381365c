#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "core/attribution.hpp"
#include "core/dataset.hpp"
#include "core/forest.hpp"
#include "core/logistic.hpp"
#include "core/mlp.hpp"
#include "core/oracle_check.hpp"

#include <cmath>

using namespace uqxai;

namespace {

// fixed linear model p(y=1|x) = sigmoid(w.x + b)
std::shared_ptr<LogisticClassifier> linear_model(const Vector& w, double b) {
  Matrix weights(1, w.size());
  weights.row(0) = w.transpose();
  Vector bias(1);
  bias << b;
  return std::make_shared<LogisticClassifier>(weights, bias, 2, LogisticConfig{});
}

BackgroundSet fixed_background(const Matrix& rows) {
  BackgroundSet bg;
  bg.rows = rows;
  return bg;
}

std::shared_ptr<RandomForest> small_forest(int d, int n_trees, int depth, std::uint64_t seed, int n = 150) {
  Rng rng(seed);
  Vector w(d);
  for (int j = 0; j < d; ++j) w(j) = rng.normal();
  const TabularDataset ds = synth_linear_dataset(d, n, w, seed + 1);
  ForestConfig cfg;
  cfg.n_trees = n_trees;
  cfg.max_depth = depth;
  cfg.min_samples_split = 2;
  cfg.min_samples_leaf = 1;
  cfg.seed = seed + 2;
  return train_random_forest(ds, cfg);
}

}  // namespace

TEST_CASE("one-feature oracle reduces to the efficiency identity") {
  Vector w(1);
  w << 2.0;
  const auto model = linear_model(w, 0.5);
  Matrix bg(3, 1);
  bg << -1.0, 0.0, 2.0;
  Vector x(1);
  x << 1.5;
  AttributionTarget target{1, OutputKind::probability};
  const auto phi = exact_shapley_oracle(*model, x, fixed_background(bg), target);
  const double v_full = interventional_value(*model, x, fixed_background(bg), 1, target);
  const double v_empty = interventional_value(*model, x, fixed_background(bg), 0, target);
  CHECK(phi.values(0) == doctest::Approx(v_full - v_empty).epsilon(1e-12));
  CHECK(phi.model_evals == 2 * 3);
}

TEST_CASE("oracle on a linear logit matches the closed form") {
  // on the logit output, phi_i = w_i * (x_i - mean_bg_i) exactly
  Vector w(5);
  w << 1.0, -2.0, 0.5, 3.0, 0.0;
  const auto model = linear_model(w, 0.7);
  Rng rng(31);
  Matrix bg(20, 5);
  for (Eigen::Index i = 0; i < bg.rows(); ++i) {
    for (int j = 0; j < 5; ++j) bg(i, j) = rng.normal();
  }
  Vector x(5);
  for (int j = 0; j < 5; ++j) x(j) = rng.normal();

  AttributionTarget target{1, OutputKind::logit};
  const auto phi = exact_shapley_oracle(*model, x, fixed_background(bg), target);
  for (int j = 0; j < 5; ++j) {
    const double expected = w(j) * (x(j) - bg.col(j).mean());
    CHECK(phi.values(j) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("oracle symmetry for interchangeable features") {
  Vector w(2);
  w << 1.0, 1.0;
  const auto model = linear_model(w, 0.0);
  Matrix bg(2, 2);
  bg << 0.3, 0.3, -0.8, -0.8;  // symmetric background
  Vector x(2);
  x << 0.9, 0.9;
  AttributionTarget target{1, OutputKind::probability};
  const auto phi = exact_shapley_oracle(*model, x, fixed_background(bg), target);
  CHECK(phi.values(0) == doctest::Approx(phi.values(1)).epsilon(1e-12));
}

TEST_CASE("oracle rejects too many features") {
  Vector w = Vector::Ones(17);
  const auto model = linear_model(w, 0.0);
  CHECK_THROWS_WITH_AS(
      exact_shapley_oracle(*model, Vector::Zero(17), fixed_background(Matrix::Zero(2, 17)), AttributionTarget{1}),
      doctest::Contains("enumeration limit"), Error);
}

TEST_CASE("kernel shap with full enumeration equals the oracle on a d=8 model") {
  const auto forest = small_forest(8, 4, 3, 100);
  Rng rng(8);
  Matrix bg(12, 8);
  for (Eigen::Index i = 0; i < bg.rows(); ++i) {
    for (int j = 0; j < 8; ++j) bg(i, j) = rng.normal();
  }
  Vector x(8);
  for (int j = 0; j < 8; ++j) x(j) = rng.normal();
  AttributionTarget target{1, OutputKind::probability};
  const auto oracle = exact_shapley_oracle(*forest, x, fixed_background(bg), target);
  const auto kernel = kernel_shap(*forest, x, fixed_background(bg), target, (1 << 8) - 2, 5);
  CHECK((oracle.values - kernel.values).cwiseAbs().maxCoeff() < 1e-6);
  CHECK_FALSE(kernel.ridge_stabilized);
}

TEST_CASE("kernel shap with a sampled budget stays close and satisfies efficiency") {
  const auto forest = small_forest(10, 5, 3, 200);
  Rng rng(9);
  Matrix bg(10, 10);
  for (Eigen::Index i = 0; i < bg.rows(); ++i) {
    for (int j = 0; j < 10; ++j) bg(i, j) = rng.normal();
  }
  Vector x(10);
  for (int j = 0; j < 10; ++j) x(j) = rng.normal();
  AttributionTarget target{1, OutputKind::probability};
  const auto sampled = kernel_shap(*forest, x, fixed_background(bg), target, 400, 5);
  const double v_full = interventional_value(*forest, x, fixed_background(bg), (1ull << 10) - 1, target);
  const double v_empty = interventional_value(*forest, x, fixed_background(bg), 0, target);
  CHECK(sampled.values.sum() == doctest::Approx(v_full - v_empty).epsilon(1e-9));
  const auto oracle = exact_shapley_oracle(*forest, x, fixed_background(bg), target);
  CHECK((oracle.values - sampled.values).cwiseAbs().maxCoeff() < 0.1);
}

TEST_CASE("explaining a background row gives zero attributions") {
  Vector w(4);
  w << 1.0, 2.0, -1.0, 0.5;
  const auto model = linear_model(w, 0.0);
  Matrix bg(1, 4);
  bg << 0.4, -0.2, 0.1, 0.9;
  const Vector x = bg.row(0).transpose();
  AttributionTarget target{1, OutputKind::probability};
  const auto oracle = exact_shapley_oracle(*model, x, fixed_background(bg), target);
  CHECK(oracle.values.cwiseAbs().maxCoeff() < 1e-12);
  const auto kernel = kernel_shap(*model, x, fixed_background(bg), target, (1 << 4) - 2, 3);
  CHECK(kernel.values.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("constant model attributes nothing") {
  // forest trained on single-class data predicts 1.0 everywhere
  Matrix x(30, 3);
  x.setRandom();
  TabularDataset ds;
  ds.features = x;
  ds.labels = std::vector<int>(30, 1);
  ds.schema.name = "const";
  ds.schema.n_features = 3;
  ds.schema.n_classes = 2;
  ds.schema.feature_names = {"a", "b", "c"};
  ForestConfig fc;
  fc.n_trees = 5;
  const auto forest = train_random_forest(ds, fc);
  Vector q(3);
  q << 9.0, -9.0, 0.0;
  AttributionTarget target{1, OutputKind::probability};
  const auto kernel = kernel_shap(*forest, q, fixed_background(Matrix::Random(6, 3)), target, (1 << 3) - 2, 2);
  CHECK(kernel.values.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("tree shap equals the oracle on random small forests") {
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 4 + trial % 7;  // up to 10
    const auto forest = small_forest(d, 1 + trial % 5, 3, 300 + static_cast<std::uint64_t>(trial));
    Rng rng(40 + static_cast<std::uint64_t>(trial));
    Matrix bg(8, d);
    for (Eigen::Index i = 0; i < bg.rows(); ++i) {
      for (int j = 0; j < d; ++j) bg(i, j) = rng.normal();
    }
    Vector x(d);
    for (int j = 0; j < d; ++j) x(j) = rng.normal();
    AttributionTarget target{1, OutputKind::probability};
    const auto oracle = exact_shapley_oracle(*forest, x, fixed_background(bg), target);
    const auto tree = tree_shap(*forest, x, fixed_background(bg), 1);
    CHECK((oracle.values - tree.values).cwiseAbs().maxCoeff() < 1e-9);

    // efficiency on every query
    const double v_full = interventional_value(*forest, x, fixed_background(bg), (1ull << d) - 1, target);
    const double v_empty = interventional_value(*forest, x, fixed_background(bg), 0, target);
    CHECK(tree.values.sum() == doctest::Approx(v_full - v_empty).epsilon(1e-12));
  }
}

TEST_CASE("a stump puts all mass on its split feature") {
  // training data where only feature 1 matters
  Matrix x(40, 3);
  std::vector<int> y(40);
  Rng rng(77);
  for (int i = 0; i < 40; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = i < 20 ? -1.0 + 0.1 * rng.normal() : 1.0 + 0.1 * rng.normal();
    x(i, 2) = rng.normal();
    y[static_cast<std::size_t>(i)] = i < 20 ? 0 : 1;
  }
  TabularDataset ds;
  ds.features = x;
  ds.labels = y;
  ds.schema.name = "stump";
  ds.schema.n_features = 3;
  ds.schema.n_classes = 2;
  ds.schema.feature_names = {"a", "b", "c"};
  ForestConfig cfg;
  cfg.n_trees = 1;
  cfg.max_depth = 1;
  cfg.min_samples_split = 2;
  cfg.min_samples_leaf = 1;
  const auto forest = train_random_forest(ds, cfg);
  REQUIRE(forest->trees().front().nodes().size() == 3);
  const int split_feature = forest->trees().front().nodes().front().feature;
  CHECK(split_feature == 1);

  Vector q(3);
  q << 0.5, 2.0, -0.5;
  const auto phi = tree_shap(*forest, q, fixed_background(x.topRows(10)), 1);
  for (int j = 0; j < 3; ++j) {
    if (j != split_feature) CHECK(phi.values(j) == 0.0);  // null player, exactly
  }
  CHECK(std::abs(phi.values(split_feature)) > 0.0);
}

TEST_CASE("lime recovers the ranking of a linear model") {
  Vector w(6);
  w << 3.0, -2.0, 1.5, 0.8, -0.3, 0.0;
  const auto model = linear_model(w, 0.0);
  Vector stds = Vector::Ones(6);
  Vector x = Vector::Zero(6);
  LimeConfig cfg;
  cfg.n_samples = 20000;
  const auto phi = lime(*model, x, stds, 1, cfg, 17);
  CHECK(phi.model_evals == 20000);
  // coefficient signs and ordering by |w| (stds are 1)
  for (int j = 0; j < 5; ++j) {
    if (w(j) > 0) CHECK(phi.values(j) > 0.0);
    if (w(j) < 0) CHECK(phi.values(j) < 0.0);
  }
  const Vector ranking = abs_ranking(phi.values);
  const Vector true_ranking = abs_ranking(w);
  // top-3 features agree in rank order
  CHECK(ranking(0) == true_ranking(0));
  CHECK(ranking(1) == true_ranking(1));
  CHECK(ranking(2) == true_ranking(2));
}

TEST_CASE("lime keeps everything when d <= top_k and masks beyond it") {
  Vector w(4);
  w << 1.0, 2.0, 3.0, 4.0;
  const auto model = linear_model(w, 0.0);
  const auto phi = lime(*model, Vector::Zero(4), Vector::Ones(4), 1, LimeConfig{}, 3);
  CHECK(std::count(phi.topk_mask.begin(), phi.topk_mask.end(), true) == 4);

  Vector w12 = Vector::LinSpaced(12, 0.1, 1.2);
  Matrix weights(1, 12);
  weights.row(0) = w12.transpose();
  const auto wide = std::make_shared<LogisticClassifier>(weights, Vector::Zero(1), 2, LogisticConfig{});
  const auto masked = lime(*wide, Vector::Zero(12), Vector::Ones(12), 1, LimeConfig{}, 3);
  CHECK(std::count(masked.topk_mask.begin(), masked.topk_mask.end(), true) == 10);
  int zeros = 0;
  for (Eigen::Index j = 0; j < 12; ++j) zeros += masked.values(j) == 0.0 ? 1 : 0;
  CHECK(zeros >= 2);
}

TEST_CASE("lime on a constant model is zero") {
  Matrix weights = Matrix::Zero(1, 5);
  const auto model = std::make_shared<LogisticClassifier>(weights, Vector::Zero(1), 2, LogisticConfig{});
  const auto phi = lime(*model, Vector::Zero(5), Vector::Ones(5), 1, LimeConfig{}, 9);
  CHECK(phi.values.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("integrated gradients is exact on a linear logit") {
  Vector w(5);
  w << 2.0, -1.0, 0.5, 0.0, 3.0;
  const auto model = linear_model(w, 1.0);
  Vector x(5);
  x << 1.0, 2.0, -0.5, 4.0, 0.1;
  for (int steps : {1, 7, 50}) {
    const auto phi = integrated_gradients(*model, x, Vector::Zero(5), steps, 1);
    for (int j = 0; j < 5; ++j) CHECK(phi.values(j) == doctest::Approx(w(j) * x(j)).epsilon(1e-12));
    CHECK(phi.model_evals == steps);
  }
  // baseline query explains nothing
  const auto at_baseline = integrated_gradients(*model, Vector::Zero(5), Vector::Zero(5), 50, 1);
  CHECK(at_baseline.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("integrated gradients completeness tightens with steps on an mlp") {
  Vector w(4);
  w << 1.0, -2.0, 0.5, 1.5;
  const TabularDataset ds = synth_linear_dataset(4, 1000, w, 55);
  const auto parts = split(ds, SplitSpec{0.7, 0.15, 0.15, 6});
  MlpConfig cfg;
  cfg.hidden = {16, 8};
  cfg.max_epochs = 15;
  cfg.seed = 2;
  const auto net = train_mlp(parts[0], parts[1], cfg);

  Rng rng(66);
  double err_10 = 0.0, err_50 = 0.0, err_500 = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    Vector x(4);
    for (int j = 0; j < 4; ++j) x(j) = rng.normal();
    const int target = net->predict(x.transpose())[0];
    const double fx = net->predict_logits(x.transpose())(0, target);
    const double f0 = net->predict_logits(Vector::Zero(4).transpose())(0, target);
    const double denom = std::max(std::abs(fx - f0), 1e-9);
    auto rel_err = [&](int steps) {
      const auto phi = integrated_gradients(*net, x, Vector::Zero(4), steps, target);
      return std::abs(phi.values.sum() - (fx - f0)) / denom;
    };
    err_10 += rel_err(10);
    err_50 += rel_err(50);
    err_500 += rel_err(500);
  }
  CHECK(err_500 / 5 < 1e-2);
  CHECK(err_500 <= err_10 + 1e-9);
  CHECK(err_50 <= err_10 + 1e-9);
}

TEST_CASE("smoothing is the identity at sigma 0 and on linear gradients") {
  Vector w(3);
  w << 1.0, -1.0, 2.0;
  const auto model = linear_model(w, 0.0);
  Vector x(3);
  x << 0.5, 0.5, 0.5;

  SmoothConfig sg;
  sg.base = SmoothBase::vanilla_gradient;
  sg.n_noise = 20;
  sg.sigma = 0.0;
  const auto base = vanilla_gradient(*model, x, 1);
  const auto smoothed = smooth(*model, x, 1, sg, 4);
  CHECK((smoothed.values - base.values).cwiseAbs().maxCoeff() == 0.0);

  // linear model: gradient constant, smoothing changes nothing at any sigma
  sg.sigma = 0.4;
  const auto noisy = smooth(*model, x, 1, sg, 4);
  CHECK((noisy.values - base.values).cwiseAbs().maxCoeff() < 1e-12);

  // deterministic per seed
  SmoothConfig sig;
  sig.base = SmoothBase::integrated_gradients;
  sig.n_noise = 5;
  sig.ig_steps = 10;
  const TabularDataset ds = synth_linear_dataset(3, 400, w, 3);
  const auto parts = split(ds, SplitSpec{0.7, 0.15, 0.15, 7});
  MlpConfig mc;
  mc.hidden = {8};
  mc.max_epochs = 3;
  const auto net = train_mlp(parts[0], parts[1], mc);
  const auto a = smooth(*net, x, 0, sig, 99);
  const auto b = smooth(*net, x, 0, sig, 99);
  CHECK((a.values - b.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.model_evals == 5 * 10);
}

TEST_CASE("abs ranking handles signs and ties") {
  Vector phi(3);
  phi << -3.0, 1.0, 2.0;
  const Vector ranks = abs_ranking(phi);
  CHECK(ranks(0) == 3.0);
  CHECK(ranks(1) == 1.0);
  CHECK(ranks(2) == 2.0);

  Vector equal = Vector::Constant(4, 0.5);
  const Vector tied = abs_ranking(equal);
  for (int j = 0; j < 4; ++j) CHECK(tied(j) == doctest::Approx(2.5));  // (d+1)/2

  Vector single(1);
  single << -7.0;
  CHECK(abs_ranking(single)(0) == 1.0);
}

TEST_CASE("oracle check suite is green") { CHECK(run_oracle_checks(false) == 0); }
