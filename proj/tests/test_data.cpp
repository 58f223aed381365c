#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "core/dataset.hpp"
#include "core/rng.hpp"

#include <fstream>
#include <set>

using namespace uqxai;

namespace {

DatasetSchema wine_schema() {
  DatasetSchema s;
  s.name = "wine";
  s.n_features = 11;
  s.n_classes = 2;
  s.label_transform = LabelTransform::wine_binarize;
  return s;
}

std::string write_temp_csv(const std::string& name, const std::string& content) {
  const std::string path = "/tmp/uqxai_" + name;
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("wine csv loads with the documented shape") {
  LoadStats stats;
  const TabularDataset ds = load_dataset("data/wine.csv", wine_schema(), &stats);
  CHECK(ds.n_rows() == 6497);
  CHECK(ds.n_features() == 11);
  CHECK(ds.n_classes() == 2);
  CHECK(stats.rejected_rows == 0);

  // binarization leaves exactly two classes
  std::set<int> classes(ds.labels.begin(), ds.labels.end());
  CHECK(classes == std::set<int>{0, 1});
}

TEST_CASE("empty and mismatched files are rejected") {
  const std::string empty = write_temp_csv("empty.csv", "a,b,c\n");
  DatasetSchema s;
  s.name = "t";
  s.n_features = 2;
  s.n_classes = 2;
  CHECK_THROWS_WITH_AS(load_dataset(empty, s), doctest::Contains("empty dataset"), Error);

  const std::string narrow = write_temp_csv("narrow.csv", "a,b,c\n1,2,0\n");
  DatasetSchema wide = s;
  wide.n_features = 11;
  CHECK_THROWS_WITH_AS(load_dataset(narrow, wide), doctest::Contains("column mismatch"), Error);
}

TEST_CASE("unparseable rows are counted, not fatal") {
  const std::string path = write_temp_csv("bad_rows.csv", "a,b,y\n1,2,0\nx,2,1\n3,nan,0\n4,5,1\n");
  DatasetSchema s;
  s.name = "t";
  s.n_features = 2;
  s.n_classes = 2;
  LoadStats stats;
  const TabularDataset ds = load_dataset(path, s, &stats);
  CHECK(ds.n_rows() == 2);
  CHECK(stats.rejected_rows == 2);
}

TEST_CASE("split sizes match the reference counts") {
  const TabularDataset bean = load_dataset("data/bean.csv", [] {
    DatasetSchema s;
    s.name = "bean";
    s.n_features = 16;
    s.n_classes = 7;
    return s;
  }());
  CHECK(bean.n_rows() == 13611);
  const auto parts = split(bean, SplitSpec{});
  CHECK(parts[0].n_rows() == 9527);
  CHECK(parts[1].n_rows() == 2042);
  CHECK(parts[2].n_rows() == 2042);
}

TEST_CASE("split is a deterministic partition") {
  Vector w(3);
  w << 1.0, -2.0, 0.5;
  const TabularDataset ds = synth_linear_dataset(3, 10, w, 7);
  SplitSpec spec;
  spec.seed = 123;
  const auto a = split(ds, spec);
  const auto b = split(ds, spec);
  CHECK(a[0].n_rows() == 7);
  CHECK(a[1].n_rows() == 1);
  CHECK(a[2].n_rows() == 2);
  for (int part = 0; part < 3; ++part) {
    CHECK(a[part].features == b[part].features);
    CHECK(a[part].labels == b[part].labels);
  }

  // partition property: every row lands in exactly one split, any seed
  for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
    spec.seed = seed;
    const auto parts = split(ds, spec);
    std::multiset<double> seen;
    for (const auto& part : parts) {
      for (Eigen::Index i = 0; i < part.n_rows(); ++i) seen.insert(part.features(i, 0));
    }
    std::multiset<double> expected;
    for (Eigen::Index i = 0; i < ds.n_rows(); ++i) expected.insert(ds.features(i, 0));
    CHECK(seen == expected);
  }
}

TEST_CASE("permuting the input changes membership under the same seed") {
  Vector w(2);
  w << 1.0, 1.0;
  const TabularDataset ds = synth_linear_dataset(2, 100, w, 5);
  TabularDataset reversed = ds;
  for (Eigen::Index i = 0; i < ds.n_rows(); ++i) {
    reversed.features.row(i) = ds.features.row(ds.n_rows() - 1 - i);
    reversed.labels[static_cast<std::size_t>(i)] = ds.labels[static_cast<std::size_t>(ds.n_rows() - 1 - i)];
  }
  SplitSpec spec;
  spec.seed = 11;
  const auto a = split(ds, spec);
  const auto b = split(reversed, spec);
  CHECK(a[0].features != b[0].features);
}

TEST_CASE("standardizer centers, scales, and round-trips") {
  TabularDataset ds;
  ds.schema.name = "t";
  ds.schema.n_features = 2;
  ds.schema.n_classes = 2;
  ds.schema.feature_names = {"a", "b"};
  ds.features.resize(2, 2);
  ds.features << 0.0, 3.0, 2.0, 3.0;  // col 0 = {0,2}, col 1 constant
  ds.labels = {0, 1};

  const Standardizer s = fit_standardizer(ds);
  CHECK(s.means(0) == doctest::Approx(1.0));
  CHECK(s.stds(0) == doctest::Approx(1.0));  // population std of {0,2}
  CHECK(s.stds(1) == 1.0);                   // constant column rule

  const Matrix z = s.apply(ds.features);
  CHECK(z(0, 0) == doctest::Approx(-1.0));
  CHECK(z(1, 0) == doctest::Approx(1.0));
  CHECK(z(0, 1) == doctest::Approx(0.0));

  const Matrix back = s.invert(z);
  CHECK((back - ds.features).cwiseAbs().maxCoeff() < 1e-9);

  // train-fitted statistics are not re-estimated on new data
  Matrix other(1, 2);
  other << 10.0, 10.0;
  const Matrix zo = s.apply(other);
  CHECK(zo(0, 0) == doctest::Approx((10.0 - 1.0) / 1.0));
}

TEST_CASE("standardizer round-trip on real data") {
  const TabularDataset wine = load_dataset("data/wine.csv", wine_schema());
  const auto parts = split(wine, SplitSpec{});
  const Standardizer s = fit_standardizer(parts[0]);
  const Matrix z = s.apply(parts[0].features);
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    CHECK(std::abs(z.col(j).mean()) < 1e-9);
    CHECK(std::sqrt((z.col(j).array() - z.col(j).mean()).square().mean()) == doctest::Approx(1.0));
  }
  CHECK((s.invert(z) - parts[0].features).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("synthetic linear dataset is reproducible and labelled by w.x") {
  Vector w(4);
  w << 3.0, 0.0, -1.0, 0.5;
  const TabularDataset a = synth_linear_dataset(4, 200, w, 42);
  const TabularDataset b = synth_linear_dataset(4, 200, w, 42);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  for (Eigen::Index i = 0; i < a.n_rows(); ++i) {
    CHECK(a.labels[static_cast<std::size_t>(i)] == (a.features.row(i).dot(w) > 0 ? 1 : 0));
  }

  // zero weights collapse to one class
  const TabularDataset degenerate = synth_linear_dataset(2, 50, Vector::Zero(2), 1);
  std::set<int> classes(degenerate.labels.begin(), degenerate.labels.end());
  CHECK(classes.size() == 1);
}

TEST_CASE("schema config parsing") {
  const auto cfg = KeyValueConfig::from_file("configs/wine.cfg");
  const DatasetSchema s = DatasetSchema::from_config(cfg);
  CHECK(s.name == "wine");
  CHECK(s.n_features == 11);
  CHECK(s.label_transform == LabelTransform::wine_binarize);
}
