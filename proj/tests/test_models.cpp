#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "core/dataset.hpp"
#include "core/forest.hpp"
#include "core/logistic.hpp"
#include "core/metrics.hpp"
#include "core/mlp.hpp"
#include "core/serialize.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

using namespace uqxai;

namespace {

TabularDataset tiny(const Matrix& x, std::vector<int> y, int k) {
  TabularDataset ds;
  ds.features = x;
  ds.labels = std::move(y);
  ds.schema.name = "tiny";
  ds.schema.n_features = static_cast<int>(x.cols());
  ds.schema.n_classes = k;
  for (int j = 0; j < ds.schema.n_features; ++j) ds.schema.feature_names.push_back("x" + std::to_string(j));
  return ds;
}

void check_simplex(const Matrix& p) {
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      CHECK(p(i, j) >= 0.0);
      CHECK(p(i, j) <= 1.0);
      sum += p(i, j);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

std::string bundle_bytes(const ModelBundle& bundle) {
  const std::string path = "/tmp/uqxai_model_rt.json";
  save_bundle(path, bundle);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("logistic regression separates a 2-point problem with the right sign") {
  Matrix x(2, 1);
  x << -1.0, 1.0;
  const auto model = train_logistic(tiny(x, {0, 1}, 2));
  CHECK(model->weights()(0, 0) > 0.0);
  check_simplex(model->predict_proba(x));

  // logits agree with probabilities through the softmax
  const Matrix logits = model->predict_logits(x);
  const Matrix p = softmax_rows(logits);
  CHECK((p - model->predict_proba(x)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("logistic regression recovers a planted direction") {
  Vector w(5);
  w << 2.0, -1.0, 0.5, 0.0, 1.5;
  const TabularDataset ds = synth_linear_dataset(5, 5000, w, 17);
  const auto model = train_logistic(ds);
  const Vector learned = model->weights().row(0).transpose();
  const double cosine = learned.dot(w) / (learned.norm() * w.norm());
  CHECK(cosine > 0.99);
}

TEST_CASE("logistic regression rejects single-class labels") {
  Matrix x(3, 2);
  x.setRandom();
  CHECK_THROWS_WITH_AS(train_logistic(tiny(x, {1, 1, 1}, 2)), doctest::Contains("single class"), Error);
}

TEST_CASE("zero-weight logistic model is uniform") {
  LogisticConfig cfg;
  const LogisticClassifier model(Matrix::Zero(1, 3), Vector::Zero(1), 2, cfg);
  Matrix x(1, 3);
  x << 1.0, 2.0, 3.0;
  const Matrix p = model.predict_proba(x);
  CHECK(p(0, 0) == doctest::Approx(0.5));
  CHECK(p(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("logistic input gradient is the weight row exactly") {
  Vector w(3);
  w << 1.0, -2.0, 0.5;
  const TabularDataset ds = synth_linear_dataset(3, 400, w, 3);
  const auto model = train_logistic(ds);
  Vector x(3);
  x << 0.1, 0.2, 0.3;
  const Vector g1 = model->input_gradient(x, 1);
  CHECK((g1 - model->weights().row(0).transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(model->input_gradient(x, 0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("multiclass logistic trains and stays on the simplex") {
  Rng rng(5);
  Matrix x(300, 2);
  std::vector<int> y(300);
  for (int i = 0; i < 300; ++i) {
    const int c = i % 3;
    x(i, 0) = (c == 0 ? -2.0 : c == 1 ? 0.0 : 2.0) + 0.4 * rng.normal();
    x(i, 1) = (c == 2 ? 1.0 : -1.0) + 0.4 * rng.normal();
    y[static_cast<std::size_t>(i)] = c;
  }
  const auto model = train_logistic(tiny(x, y, 3));
  check_simplex(model->predict_proba(x));
  const auto pred = model->predict(x);
  CHECK(accuracy(y, pred) > 0.9);
}

TEST_CASE("random forest on pure labels is certain everywhere") {
  Matrix x(20, 2);
  x.setRandom();
  ForestConfig cfg;
  cfg.n_trees = 10;
  cfg.min_samples_split = 2;
  cfg.min_samples_leaf = 1;
  const auto forest = train_random_forest(tiny(x, std::vector<int>(20, 1), 2), cfg);
  const Matrix p = forest->predict_proba(x);
  for (Eigen::Index i = 0; i < p.rows(); ++i) CHECK(p(i, 1) == 1.0);
  const auto members = forest->per_member_proba(x, 0);
  for (const auto& m : members) CHECK((m - p).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("random forest represents xor") {
  Rng rng(9);
  Matrix x(400, 2);
  std::vector<int> y(400);
  for (int i = 0; i < 400; ++i) {
    const int a = i % 2, b = (i / 2) % 2;
    x(i, 0) = (a ? 1.0 : -1.0) + 0.15 * rng.normal();
    x(i, 1) = (b ? 1.0 : -1.0) + 0.15 * rng.normal();
    y[static_cast<std::size_t>(i)] = a ^ b;
  }
  ForestConfig cfg;
  cfg.min_samples_split = 2;
  cfg.min_samples_leaf = 1;
  cfg.seed = 3;
  const auto forest = train_random_forest(tiny(x, y, 2), cfg);
  CHECK(accuracy(y, forest->predict(x)) > 0.95);
}

TEST_CASE("forest ensemble probability is the member mean") {
  Vector w(4);
  w << 1.0, -1.0, 2.0, 0.0;
  const TabularDataset ds = synth_linear_dataset(4, 300, w, 21);
  ForestConfig cfg;
  cfg.n_trees = 25;
  cfg.seed = 4;
  const auto forest = train_random_forest(ds, cfg);
  const Matrix p = forest->predict_proba(ds.features.topRows(40));
  const auto members = forest->per_member_proba(ds.features.topRows(40), 0);
  Matrix mean = Matrix::Zero(p.rows(), p.cols());
  for (const auto& m : members) mean += m;
  mean /= static_cast<double>(members.size());
  CHECK((mean - p).cwiseAbs().maxCoeff() < 1e-9);
  check_simplex(p);
}

TEST_CASE("forest training is bit-identical per seed and schedule-independent") {
  Vector w(3);
  w << 1.0, 0.5, -0.5;
  const TabularDataset ds = synth_linear_dataset(3, 200, w, 8);
  ForestConfig cfg;
  cfg.n_trees = 8;
  cfg.seed = 77;
  ModelBundle a, b, c;
  a.model = train_random_forest(ds, cfg);
  b.model = train_random_forest(ds, cfg);
  cfg.jobs = 4;
  c.model = train_random_forest(ds, cfg);
  a.schema = b.schema = c.schema = ds.schema;
  const std::string bytes_a = bundle_bytes(a);
  CHECK(bytes_a == bundle_bytes(b));
  CHECK(bytes_a == bundle_bytes(c));
}

TEST_CASE("mlp with a zero epoch budget stays near uniform") {
  Vector w(4);
  w << 1.0, 1.0, -1.0, 0.0;
  const TabularDataset ds = synth_linear_dataset(4, 120, w, 2);
  const auto parts = split(ds, SplitSpec{0.7, 0.15, 0.15, 1});
  MlpConfig cfg;
  cfg.max_epochs = 0;
  cfg.seed = 12;
  const auto net = train_mlp(parts[0], parts[1], cfg);
  const Matrix p = net->predict_proba(parts[2].features);
  CHECK((p.array() - 0.5).abs().maxCoeff() < 0.2);
  check_simplex(p);
}

TEST_CASE("mlp learns a linear rule and its gradients check out") {
  Vector w(5);
  w << 1.5, -2.0, 0.8, 0.0, 1.0;
  const TabularDataset ds = synth_linear_dataset(5, 1500, w, 31);
  const auto parts = split(ds, SplitSpec{0.7, 0.15, 0.15, 2});
  MlpConfig cfg;
  cfg.hidden = {32, 16};
  cfg.max_epochs = 30;
  cfg.seed = 6;
  const auto net = train_mlp(parts[0], parts[1], cfg);
  CHECK(accuracy(parts[2].labels, net->predict(parts[2].features)) > 0.9);

  // input gradient vs central differences
  Rng rng(44);
  const double h = 1e-5;
  for (int probe = 0; probe < 20; ++probe) {
    Vector x(5);
    for (int j = 0; j < 5; ++j) x(j) = rng.normal();
    const int target = static_cast<int>(rng.uniform_int(2));
    const int coord = static_cast<int>(rng.uniform_int(5));
    const Vector grad = net->input_gradient(x, target);
    Vector xp = x, xm = x;
    xp(coord) += h;
    xm(coord) -= h;
    const double fd =
        (net->predict_logits(xp.transpose())(0, target) - net->predict_logits(xm.transpose())(0, target)) / (2 * h);
    CHECK(std::abs(fd - grad(coord)) / std::max({std::abs(fd), std::abs(grad(coord)), 1e-8}) < 1e-4);
  }

  // parameter gradients vs central differences at random coordinates
  const Matrix xb = parts[2].features.topRows(16);
  const std::vector<int> yb(parts[2].labels.begin(), parts[2].labels.begin() + 16);
  std::vector<Matrix> gw;
  std::vector<Vector> gb;
  net->param_gradients(xb, yb, &gw, &gb);
  for (int probe = 0; probe < 20; ++probe) {
    const std::size_t layer = rng.uniform_int(gw.size());
    auto weights = net->weights();
    auto biases = net->biases();
    const Eigen::Index r = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(weights[layer].rows())));
    const Eigen::Index c = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(weights[layer].cols())));
    auto loss_at = [&](double delta) {
      auto wmod = weights;
      wmod[layer](r, c) += delta;
      const MlpClassifier probe_net(wmod, biases, net->config());
      return probe_net.batch_loss(xb, yb);
    };
    const double fd = (loss_at(h) - loss_at(-h)) / (2 * h);
    const double an = gw[layer](r, c);
    CHECK(std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8}) < 1e-4);
  }
}

TEST_CASE("mlp logits are consistent with probabilities") {
  Vector w(3);
  w << 1.0, -1.0, 0.5;
  const TabularDataset ds = synth_linear_dataset(3, 300, w, 13);
  const auto parts = split(ds, SplitSpec{0.7, 0.15, 0.15, 3});
  MlpConfig cfg;
  cfg.hidden = {8};
  cfg.max_epochs = 5;
  cfg.seed = 1;
  const auto net = train_mlp(parts[0], parts[1], cfg);
  const Matrix logits = net->predict_logits(parts[2].features);
  CHECK((softmax_rows(logits) - net->predict_proba(parts[2].features)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("per-member counts match the configured ensembles") {
  Vector w(3);
  w << 1.0, 0.3, -0.7;
  const TabularDataset ds = synth_linear_dataset(3, 250, w, 23);

  ForestConfig fc;
  fc.n_trees = 100;
  const auto forest = train_random_forest(ds, fc);
  CHECK(forest->member_count() == 100);

  const auto bootstrap = train_logistic_bootstrap(ds, 20, 5);
  CHECK(bootstrap->member_count() == 20);
  CHECK(bootstrap->per_member_proba(ds.features.topRows(4), 0).size() == 20);
  // bootstrap mean equals the exposed probability
  const Matrix p = bootstrap->predict_proba(ds.features.topRows(10));
  const auto members = bootstrap->per_member_proba(ds.features.topRows(10), 0);
  Matrix mean = Matrix::Zero(p.rows(), p.cols());
  for (const auto& m : members) mean += m;
  mean /= static_cast<double>(members.size());
  CHECK((mean - p).cwiseAbs().maxCoeff() < 1e-12);

  const auto parts = split(ds, SplitSpec{0.7, 0.15, 0.15, 4});
  MlpConfig mc;
  mc.hidden = {8};
  mc.max_epochs = 2;
  const auto net = train_mlp(parts[0], parts[1], mc);
  CHECK(net->member_count() == 50);
  CHECK(net->per_member_proba(parts[2].features.topRows(3), 9).size() == 50);
}

TEST_CASE("model bundles survive a save/load round trip") {
  Vector w(4);
  w << 0.5, -0.5, 1.0, 2.0;
  const TabularDataset ds = synth_linear_dataset(4, 300, w, 77);
  const auto parts = split(ds, SplitSpec{0.7, 0.15, 0.15, 5});

  ModelBundle bundle;
  bundle.schema = ds.schema;
  bundle.standardizer = fit_standardizer(parts[0]);
  bundle.train_seed = 5;

  SUBCASE("random forest") {
    ForestConfig fc;
    fc.n_trees = 12;
    bundle.model = train_random_forest(parts[0], fc);
  }
  SUBCASE("logistic with bootstrap companion") {
    bundle.model = train_logistic(parts[0]);
    bundle.uncertainty_model = train_logistic_bootstrap(parts[0], 5, 3);
  }
  SUBCASE("mlp") {
    MlpConfig mc;
    mc.hidden = {8};
    mc.max_epochs = 3;
    bundle.model = train_mlp(parts[0], parts[1], mc);
  }

  const std::string path = "/tmp/uqxai_bundle.json";
  save_bundle(path, bundle);
  const ModelBundle loaded = load_bundle(path);
  CHECK(loaded.model->kind() == bundle.model->kind());
  const Matrix x = parts[2].features.topRows(20);
  CHECK((loaded.model->predict_proba(x) - bundle.model->predict_proba(x)).cwiseAbs().maxCoeff() == 0.0);
  if (bundle.uncertainty_model) {
    REQUIRE(loaded.uncertainty_model != nullptr);
    CHECK((loaded.uncertainty_model->predict_proba(x) - bundle.uncertainty_model->predict_proba(x))
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
  // identical bundles serialize to identical bytes
  const std::string again = "/tmp/uqxai_bundle2.json";
  save_bundle(again, loaded);
  std::ifstream a(path), b(again);
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == sb.str());
}

TEST_CASE("weighted f1 matches a hand-computed case") {
  // classes: 0 with support 3, 1 with support 1
  const std::vector<int> truth = {0, 0, 0, 1};
  const std::vector<int> pred = {0, 0, 1, 1};
  // class 0: tp=2 fp=0 fn=1 -> f1 = 4/5; class 1: tp=1 fp=1 fn=0 -> f1 = 2/3
  const double expected = (0.8 * 3 + (2.0 / 3.0) * 1) / 4.0;
  CHECK(weighted_f1(truth, pred, 2) == doctest::Approx(expected));
}
