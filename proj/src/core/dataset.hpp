#pragma once

#include "common.hpp"
#include "config.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace uqxai {

enum class LabelTransform { none, wine_binarize };

struct DatasetSchema {
  std::string name;
  std::vector<std::string> feature_names;  // filled from the CSV header when empty
  int n_features = 0;
  int n_classes = 0;
  LabelTransform label_transform = LabelTransform::none;
  std::vector<std::string> class_names;    // filled for string-labelled CSVs
  std::map<std::string, std::string> metadata;

  void validate() const;

  // schema config keys: name, n_features, n_classes, label_transform,
  // optional feature_names / csv / notes
  static DatasetSchema from_config(const KeyValueConfig& cfg);
};

struct TabularDataset {
  Matrix features;          // n_rows x n_features
  std::vector<int> labels;  // class ids in [0, n_classes)
  DatasetSchema schema;

  Eigen::Index n_rows() const { return features.rows(); }
  Eigen::Index n_features() const { return features.cols(); }
  int n_classes() const { return schema.n_classes; }

  void validate() const;  // label range, shape agreement, finiteness
};

struct SplitSpec {
  double train_frac = 0.70;
  double val_frac = 0.15;
  double test_frac = 0.15;
  std::uint64_t seed = 42;

  void validate() const;
};

// z-score transform fitted on the training split only. Population (1/n)
// standard deviation; constant columns keep std 1 so they pass through
// centered.
struct Standardizer {
  Vector means;
  Vector stds;

  Matrix apply(const Matrix& x) const;
  Matrix invert(const Matrix& x) const;
};

struct LoadStats {
  std::size_t rejected_rows = 0;
};

// CSV with header, comma delimiter, final column = label. Rows with
// unparseable or non-finite values are dropped and counted.
TabularDataset load_dataset(const std::string& path, DatasetSchema schema, LoadStats* stats = nullptr);

// Random (not stratified) partition; deterministic in the seed. Sizes match
// the two-stage convention: n_holdout = ceil((val+test)*n) split off first,
// then n_test = ceil(holdout * test/(val+test)).
std::array<TabularDataset, 3> split(const TabularDataset& ds, const SplitSpec& spec);

Standardizer fit_standardizer(const TabularDataset& train);

// Gaussian features, binary labels y = 1 iff w.x > 0. The weight vector and
// seed are recorded in the schema metadata.
TabularDataset synth_linear_dataset(int d, int n, const Vector& w, std::uint64_t seed);

// rows chosen by index, labels carried along
TabularDataset take_rows(const TabularDataset& ds, const std::vector<std::size_t>& idx);

}  // namespace uqxai
