#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "core/dataset.hpp"
#include "core/forest.hpp"
#include "core/logistic.hpp"
#include "core/mlp.hpp"
#include "core/uncertainty.hpp"

using namespace uqxai;

namespace {

Matrix member(double p0, double p1) {
  Matrix m(1, 2);
  m << p0, p1;
  return m;
}

}  // namespace

TEST_CASE("identical members have zero epistemic variance") {
  const std::vector<Matrix> members(5, member(0.3, 0.7));
  const Vector scores = ensemble_epistemic(members, ClassReduction::predicted_class);
  CHECK(scores(0) == 0.0);
}

TEST_CASE("two-member binary case matches the hand computation") {
  // member probabilities for the predicted class: 0.4 and 0.6
  const std::vector<Matrix> members = {member(0.6, 0.4), member(0.4, 0.6)};
  const Vector scores = ensemble_epistemic(members, ClassReduction::predicted_class);
  CHECK(scores(0) == doctest::Approx(0.01));  // ((0.4-0.5)^2 + (0.6-0.5)^2) / 2
  // binary: both classes carry the same variance, so the reductions agree
  const Vector mean_red = ensemble_epistemic(members, ClassReduction::mean_over_classes);
  CHECK(mean_red(0) == doctest::Approx(0.01));
}

TEST_CASE("population variance is invariant to duplicating every member") {
  std::vector<Matrix> members = {member(0.2, 0.8), member(0.5, 0.5), member(0.35, 0.65)};
  const Vector once = ensemble_epistemic(members, ClassReduction::predicted_class);
  std::vector<Matrix> doubled = members;
  doubled.insert(doubled.end(), members.begin(), members.end());
  const Vector twice = ensemble_epistemic(doubled, ClassReduction::predicted_class);
  CHECK(once(0) == doctest::Approx(twice(0)).epsilon(1e-12));
}

TEST_CASE("reduction semantics: mean over classes vs predicted class") {
  // three classes with unequal per-class variance
  Matrix a(1, 3), b(1, 3);
  a << 0.6, 0.3, 0.1;
  b << 0.4, 0.5, 0.1;
  const std::vector<Matrix> members = {a, b};
  // per-class variances: 0.01, 0.01, 0
  const Vector mean_red = ensemble_epistemic(members, ClassReduction::mean_over_classes);
  CHECK(mean_red(0) == doctest::Approx((0.01 + 0.01 + 0.0) / 3.0));
  // mean proba = (0.5, 0.4, 0.1) -> predicted class 0 -> variance 0.01
  const Vector pred_red = ensemble_epistemic(members, ClassReduction::predicted_class);
  CHECK(pred_red(0) == doctest::Approx(0.01));
}

TEST_CASE("m < 2 is rejected") {
  CHECK_THROWS_AS(ensemble_epistemic({member(0.5, 0.5)}, ClassReduction::predicted_class), Error);
}

TEST_CASE("forest is confident on separable training blobs") {
  Rng rng(3);
  Matrix x(200, 2);
  std::vector<int> y(200);
  for (int i = 0; i < 200; ++i) {
    const int c = i % 2;
    x(i, 0) = (c ? 4.0 : -4.0) + 0.2 * rng.normal();
    x(i, 1) = rng.normal();
    y[static_cast<std::size_t>(i)] = c;
  }
  TabularDataset ds;
  ds.features = x;
  ds.labels = y;
  ds.schema.name = "blobs";
  ds.schema.n_features = 2;
  ds.schema.n_classes = 2;
  ds.schema.feature_names = {"a", "b"};
  ForestConfig cfg;
  cfg.n_trees = 30;
  cfg.min_samples_split = 2;
  cfg.min_samples_leaf = 1;
  const auto forest = train_random_forest(ds, cfg);

  const EpistemicScores on_train = native_epistemic(*forest, x, ClassReduction::predicted_class, 0);
  CHECK(on_train.source == EpistemicSource::tree_variance);
  CHECK(on_train.values.mean() < 0.01);

  // far out-of-distribution queries score no lower than training points
  Matrix far = x;
  far.array() += 10.0;
  const EpistemicScores off = native_epistemic(*forest, far, ClassReduction::predicted_class, 0);
  CHECK(off.values.mean() >= on_train.values.mean());
}

TEST_CASE("mlp with dropout 0 has identical mc members") {
  Vector w(3);
  w << 1.0, -1.0, 0.5;
  const TabularDataset ds = synth_linear_dataset(3, 200, w, 11);
  const auto parts = split(ds, SplitSpec{0.7, 0.15, 0.15, 1});
  MlpConfig cfg;
  cfg.hidden = {8};
  cfg.max_epochs = 2;
  cfg.dropout = 0.0;
  const auto net = train_mlp(parts[0], parts[1], cfg);
  const EpistemicScores scores = native_epistemic(*net, parts[2].features.topRows(5),
                                                  ClassReduction::predicted_class, 42);
  CHECK(scores.source == EpistemicSource::mc_dropout);
  CHECK(scores.values.maxCoeff() == 0.0);
}

TEST_CASE("mc dropout scores are deterministic given the recorded seed") {
  Vector w(3);
  w << 0.5, 1.0, -0.5;
  const TabularDataset ds = synth_linear_dataset(3, 200, w, 19);
  const auto parts = split(ds, SplitSpec{0.7, 0.15, 0.15, 2});
  MlpConfig cfg;
  cfg.hidden = {8};
  cfg.max_epochs = 2;
  const auto net = train_mlp(parts[0], parts[1], cfg);
  const Matrix x = parts[2].features.topRows(6);
  const auto a = native_epistemic(*net, x, ClassReduction::mean_over_classes, 1234);
  const auto b = native_epistemic(*net, x, ClassReduction::mean_over_classes, 1234);
  const auto c = native_epistemic(*net, x, ClassReduction::mean_over_classes, 4321);
  CHECK((a.values - b.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.values - c.values).cwiseAbs().maxCoeff() > 0.0);
  CHECK(a.seed == 1234);
}

TEST_CASE("models without members point to the surrogate path") {
  Vector w(2);
  w << 1.0, -1.0;
  const TabularDataset ds = synth_linear_dataset(2, 100, w, 7);
  const auto lr = train_logistic(ds);
  CHECK_THROWS_WITH_AS(native_epistemic(*lr, ds.features.topRows(2), ClassReduction::predicted_class, 0),
                       doctest::Contains("surrogate"), Error);
}

TEST_CASE("surrogate scores gate an opaque model") {
  Vector w(4);
  w << 1.0, -0.5, 0.3, 0.0;
  const TabularDataset ds = synth_linear_dataset(4, 400, w, 29);
  const auto parts = split(ds, SplitSpec{0.7, 0.15, 0.15, 3});
  ForestConfig cfg;
  cfg.n_trees = 40;
  const auto surrogate = train_random_forest(parts[0], cfg);

  const auto on_train = surrogate_epistemic(*surrogate, parts[0].features, ClassReduction::predicted_class);
  CHECK(on_train.source == EpistemicSource::rf_surrogate);
  Matrix far = parts[0].features;
  far.array() += 10.0;
  const auto off = surrogate_epistemic(*surrogate, far, ClassReduction::predicted_class);
  CHECK(off.values.mean() >= on_train.values.mean());

  Matrix wrong(2, 3);
  wrong.setZero();
  CHECK_THROWS_AS(surrogate_epistemic(*surrogate, wrong, ClassReduction::predicted_class), Error);
}

TEST_CASE("epistemic summary and the cv guard") {
  Vector constant = Vector::Constant(5, 0.2);
  const auto s1 = epistemic_summary(constant);
  CHECK(s1.mean == doctest::Approx(0.2));
  CHECK(s1.std == doctest::Approx(0.0));
  CHECK(s1.cv == doctest::Approx(0.0));
  CHECK(s1.cv_defined);

  // mean 0.083 with std 0.0415 gives cv 0.5
  Vector two(2);
  two << 0.083 - 0.0415, 0.083 + 0.0415;
  const auto s2 = epistemic_summary(two);
  CHECK(s2.mean == doctest::Approx(0.083));
  CHECK(s2.cv == doctest::Approx(0.5));

  const auto s3 = epistemic_summary(Vector::Zero(4));
  CHECK_FALSE(s3.cv_defined);

  CHECK_THROWS_AS(epistemic_summary(Vector(0)), Error);
}
