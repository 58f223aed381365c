#include "dataset.hpp"

#include "csv.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>

namespace uqxai {

namespace {

bool parse_double(const std::string& s, double* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') return false;
  *out = v;
  return true;
}

}  // namespace

void DatasetSchema::validate() const {
  require(n_features >= 1, "schema " + name + ": n_features must be >= 1");
  require(n_classes >= 2, "schema " + name + ": n_classes must be >= 2");
  require(feature_names.empty() || static_cast<int>(feature_names.size()) == n_features,
          "schema " + name + ": feature_names length does not match n_features");
}

DatasetSchema DatasetSchema::from_config(const KeyValueConfig& cfg) {
  DatasetSchema schema;
  schema.name = cfg.get("name");
  schema.n_features = static_cast<int>(cfg.get_int("n_features"));
  schema.n_classes = static_cast<int>(cfg.get_int("n_classes"));
  const std::string transform = cfg.get_or("label_transform", "none");
  if (transform == "none") {
    schema.label_transform = LabelTransform::none;
  } else if (transform == "wine_binarize") {
    schema.label_transform = LabelTransform::wine_binarize;
  } else {
    fail("unknown label_transform: " + transform);
  }
  if (cfg.has("feature_names")) schema.feature_names = cfg.get_list("feature_names");
  if (cfg.has("notes")) schema.metadata["notes"] = cfg.get("notes");
  if (cfg.has("csv")) schema.metadata["csv"] = cfg.get("csv");
  schema.validate();
  return schema;
}

void TabularDataset::validate() const {
  require(features.rows() == static_cast<Eigen::Index>(labels.size()),
          "dataset " + schema.name + ": row count does not match label count");
  require(features.cols() == schema.n_features,
          "dataset " + schema.name + ": feature count does not match schema");
  require(features.allFinite(), "dataset " + schema.name + ": non-finite feature values");
  for (int y : labels) {
    require(y >= 0 && y < schema.n_classes, "dataset " + schema.name + ": label out of range");
  }
}

void SplitSpec::validate() const {
  require(std::abs(train_frac + val_frac + test_frac - 1.0) < 1e-9, "split fractions must sum to 1");
  require(train_frac > 0 && val_frac >= 0 && test_frac >= 0, "split fractions must be nonnegative");
}

TabularDataset load_dataset(const std::string& path, DatasetSchema schema, LoadStats* stats) {
  schema.validate();
  const CsvTable table = read_csv(path);
  require(!table.header.empty(), "empty file: " + path);
  require(static_cast<int>(table.header.size()) == schema.n_features + 1,
          "column mismatch: " + path + " has " + std::to_string(table.header.size()) +
              " columns, schema " + schema.name + " expects " + std::to_string(schema.n_features + 1));
  if (schema.feature_names.empty()) {
    schema.feature_names.assign(table.header.begin(), table.header.end() - 1);
  }

  std::size_t rejected = 0;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> raw_labels;
  rows.reserve(table.rows.size());
  for (const auto& fields : table.rows) {
    if (static_cast<int>(fields.size()) != schema.n_features + 1) {
      ++rejected;
      continue;
    }
    std::vector<double> row(schema.n_features);
    bool ok = true;
    for (int j = 0; j < schema.n_features; ++j) {
      if (!parse_double(fields[j], &row[j]) || !std::isfinite(row[j])) {
        ok = false;
        break;
      }
    }
    if (!ok) {
      ++rejected;
      continue;
    }
    rows.push_back(std::move(row));
    raw_labels.push_back(fields.back());
  }
  if (stats) stats->rejected_rows = rejected;
  require(!rows.empty(), "empty dataset: " + path);

  // Labels: wine_binarize maps a numeric quality column to {0, 1}; otherwise
  // numeric labels must already be class ids, and string labels are mapped by
  // sorted order.
  std::vector<int> labels(rows.size());
  if (schema.label_transform == LabelTransform::wine_binarize) {
    require(schema.n_classes == 2, "wine_binarize requires n_classes = 2");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double q;
      require(parse_double(raw_labels[i], &q), "wine_binarize: non-numeric quality value");
      labels[i] = q <= 5.0 ? 0 : 1;
    }
    schema.class_names = {"low", "high"};
  } else {
    bool all_numeric = true;
    for (const auto& s : raw_labels) {
      double v;
      if (!parse_double(s, &v) || v != std::floor(v)) {
        all_numeric = false;
        break;
      }
    }
    if (all_numeric) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        double v = 0.0;
        parse_double(raw_labels[i], &v);
        labels[i] = static_cast<int>(v);
      }
    } else {
      std::set<std::string> uniq(raw_labels.begin(), raw_labels.end());
      require(static_cast<int>(uniq.size()) == schema.n_classes,
              "dataset " + schema.name + ": found " + std::to_string(uniq.size()) +
                  " label values, schema expects " + std::to_string(schema.n_classes));
      schema.class_names.assign(uniq.begin(), uniq.end());
      std::map<std::string, int> ids;
      for (std::size_t i = 0; i < schema.class_names.size(); ++i) ids[schema.class_names[i]] = static_cast<int>(i);
      for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = ids[raw_labels[i]];
    }
  }

  TabularDataset ds;
  ds.schema = std::move(schema);
  ds.labels = std::move(labels);
  ds.features.resize(static_cast<Eigen::Index>(rows.size()), ds.schema.n_features);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < ds.schema.n_features; ++j) ds.features(static_cast<Eigen::Index>(i), j) = rows[i][j];
  }
  ds.validate();
  return ds;
}

TabularDataset take_rows(const TabularDataset& ds, const std::vector<std::size_t>& idx) {
  TabularDataset out;
  out.schema = ds.schema;
  out.features.resize(static_cast<Eigen::Index>(idx.size()), ds.features.cols());
  out.labels.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = ds.features.row(static_cast<Eigen::Index>(idx[i]));
    out.labels[i] = ds.labels[idx[i]];
  }
  return out;
}

std::array<TabularDataset, 3> split(const TabularDataset& ds, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = static_cast<std::size_t>(ds.n_rows());
  require(n >= 3, "split needs at least 3 rows");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(spec.seed);
  rng.shuffle(order);

  const double holdout_frac = spec.val_frac + spec.test_frac;
  const std::size_t n_holdout = static_cast<std::size_t>(std::ceil(holdout_frac * static_cast<double>(n) - 1e-12));
  const std::size_t n_train = n - n_holdout;
  const double test_share = holdout_frac > 0 ? spec.test_frac / holdout_frac : 0.0;
  const std::size_t n_test = static_cast<std::size_t>(std::ceil(test_share * static_cast<double>(n_holdout) - 1e-12));
  const std::size_t n_val = n_holdout - n_test;
  require(n_train >= 1, "split leaves an empty training set");

  std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> val_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                                   order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  std::vector<std::size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return {take_rows(ds, train_idx), take_rows(ds, val_idx), take_rows(ds, test_idx)};
}

Standardizer fit_standardizer(const TabularDataset& train) {
  require(train.n_rows() > 0, "fit_standardizer: empty training split");
  const Matrix& x = train.features;
  Standardizer s;
  s.means = x.colwise().mean();
  s.stds.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - s.means(j)).square().mean();
    const double sd = std::sqrt(var);
    s.stds(j) = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
  require(x.cols() == means.size(), "standardizer: feature count mismatch");
  return (x.rowwise() - means.transpose()).array().rowwise() / stds.transpose().array();
}

Matrix Standardizer::invert(const Matrix& x) const {
  require(x.cols() == means.size(), "standardizer: feature count mismatch");
  return (x.array().rowwise() * stds.transpose().array()).matrix().rowwise() + means.transpose();
}

TabularDataset synth_linear_dataset(int d, int n, const Vector& w, std::uint64_t seed) {
  require(d >= 1, "synth_linear_dataset: d must be >= 1");
  require(w.size() == d, "synth_linear_dataset: weight length must equal d");
  Rng rng(seed);
  TabularDataset ds;
  ds.features.resize(n, d);
  ds.labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) ds.features(i, j) = rng.normal();
    ds.labels[static_cast<std::size_t>(i)] = ds.features.row(i).dot(w) > 0.0 ? 1 : 0;
  }
  ds.schema.name = "synth_linear";
  ds.schema.n_features = d;
  ds.schema.n_classes = 2;
  for (int j = 0; j < d; ++j) ds.schema.feature_names.push_back("x" + std::to_string(j));
  std::ostringstream ws;
  for (int j = 0; j < d; ++j) {
    if (j) ws << ',';
    ws << format_double(w(j));
  }
  ds.schema.metadata["weights"] = ws.str();
  ds.schema.metadata["seed"] = std::to_string(seed);
  ds.validate();
  return ds;
}

}  // namespace uqxai
