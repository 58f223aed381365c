#include "uqxai/uqxai.h"

#include "core/attribution.hpp"
#include "core/csv.hpp"
#include "core/dataset.hpp"
#include "core/experiments.hpp"
#include "core/gating.hpp"
#include "core/logistic.hpp"
#include "core/metrics.hpp"
#include "core/mlp.hpp"
#include "core/oracle_check.hpp"
#include "core/serialize.hpp"
#include "core/stability.hpp"
#include "core/uncertainty.hpp"

#include <cstring>
#include <string>

namespace {

thread_local std::string g_last_error;

uqx_status fail_with(const std::string& message, uqx_status code = UQX_ERROR) {
  g_last_error = message;
  return code;
}

template <typename Fn>
uqx_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const uqxai::Error& e) {
    return fail_with(e.what());
  } catch (const std::exception& e) {
    return fail_with(e.what());
  } catch (...) {
    return fail_with("unknown failure");
  }
}

uqxai::Matrix wrap_features(const double* features, int64_t n_rows, int n_features) {
  uqxai::Matrix x(n_rows, n_features);
  for (int64_t i = 0; i < n_rows; ++i) {
    for (int j = 0; j < n_features; ++j) x(i, j) = features[i * n_features + j];
  }
  return x;
}

}  // namespace

struct uqx_dataset {
  uqxai::TabularDataset data;
};

struct uqx_model {
  uqxai::ModelBundle bundle;
};

extern "C" {

const char* uqx_version(void) { return "1.0.0"; }

const char* uqx_last_error(void) { return g_last_error.c_str(); }

uqx_status uqx_dataset_load(const char* csv_path, const char* schema_config_path, uqx_dataset** out) {
  if (!csv_path || !schema_config_path || !out) return fail_with("null argument", UQX_INVALID_ARGUMENT);
  return guarded([&] {
    auto schema = uqxai::DatasetSchema::from_config(uqxai::KeyValueConfig::from_file(schema_config_path));
    auto handle = std::make_unique<uqx_dataset>();
    handle->data = uqxai::load_dataset(csv_path, std::move(schema));
    *out = handle.release();
    return UQX_OK;
  });
}

uqx_status uqx_dataset_synth_linear(int n_features, int64_t n_rows, const double* weights, uint64_t seed,
                                    uqx_dataset** out) {
  if (!weights || !out) return fail_with("null argument", UQX_INVALID_ARGUMENT);
  return guarded([&] {
    uqxai::Vector w(n_features);
    for (int j = 0; j < n_features; ++j) w(j) = weights[j];
    auto handle = std::make_unique<uqx_dataset>();
    handle->data = uqxai::synth_linear_dataset(n_features, static_cast<int>(n_rows), w, seed);
    *out = handle.release();
    return UQX_OK;
  });
}

uqx_status uqx_dataset_shape(const uqx_dataset* ds, int64_t* n_rows, int* n_features, int* n_classes) {
  if (!ds) return fail_with("null dataset", UQX_INVALID_ARGUMENT);
  if (n_rows) *n_rows = static_cast<int64_t>(ds->data.n_rows());
  if (n_features) *n_features = static_cast<int>(ds->data.n_features());
  if (n_classes) *n_classes = ds->data.n_classes();
  return UQX_OK;
}

uqx_status uqx_dataset_data(const uqx_dataset* ds, double* features, int32_t* labels) {
  if (!ds) return fail_with("null dataset", UQX_INVALID_ARGUMENT);
  const auto& d = ds->data;
  if (features) {
    for (Eigen::Index i = 0; i < d.n_rows(); ++i) {
      for (Eigen::Index j = 0; j < d.n_features(); ++j) features[i * d.n_features() + j] = d.features(i, j);
    }
  }
  if (labels) {
    for (std::size_t i = 0; i < d.labels.size(); ++i) labels[i] = d.labels[i];
  }
  return UQX_OK;
}

uqx_status uqx_dataset_split(const uqx_dataset* ds, double train_frac, double val_frac, double test_frac,
                             uint64_t seed, uqx_dataset** train, uqx_dataset** val, uqx_dataset** test) {
  if (!ds || !train || !val || !test) return fail_with("null argument", UQX_INVALID_ARGUMENT);
  return guarded([&] {
    uqxai::SplitSpec spec{train_frac, val_frac, test_frac, seed};
    auto parts = uqxai::split(ds->data, spec);
    auto a = std::make_unique<uqx_dataset>();
    auto b = std::make_unique<uqx_dataset>();
    auto c = std::make_unique<uqx_dataset>();
    a->data = std::move(parts[0]);
    b->data = std::move(parts[1]);
    c->data = std::move(parts[2]);
    *train = a.release();
    *val = b.release();
    *test = c.release();
    return UQX_OK;
  });
}

void uqx_dataset_free(uqx_dataset* ds) { delete ds; }

uqx_status uqx_train(const char* model_kind, const char* uncertainty, const uqx_dataset* dataset,
                     uint64_t seed, int jobs, uqx_model** out) {
  if (!model_kind || !uncertainty || !dataset || !out) return fail_with("null argument", UQX_INVALID_ARGUMENT);
  return guarded([&] {
    using namespace uqxai;
    SplitSpec spec;
    spec.seed = seed;
    auto parts = split(dataset->data, spec);
    Standardizer standardizer = fit_standardizer(parts[0]);
    for (auto* part : {&parts[0], &parts[1], &parts[2]}) part->features = standardizer.apply(part->features);

    auto handle = std::make_unique<uqx_model>();
    ModelBundle& bundle = handle->bundle;
    bundle.schema = dataset->data.schema;
    bundle.standardizer = standardizer;
    bundle.train_seed = seed;

    const std::string kind = model_kind;
    if (kind == "rf") {
      ForestConfig fc;
      fc.seed = seed;
      fc.jobs = jobs > 0 ? jobs : 1;
      bundle.model = train_random_forest(parts[0], fc);
    } else if (kind == "lr") {
      LogisticConfig lc;
      lc.seed = seed;
      bundle.model = train_logistic(parts[0], lc);
      if (std::string(uncertainty) == "native") {
        bundle.uncertainty_model = train_logistic_bootstrap(parts[0], 20, seed, lc);
      }
    } else if (kind == "mlp") {
      MlpConfig mc;
      mc.seed = seed;
      bundle.model = train_mlp(parts[0], parts[1], mc);
    } else {
      return fail_with("unknown model kind: " + kind, UQX_INVALID_ARGUMENT);
    }

    if (std::string(uncertainty) == "rf_surrogate") {
      ForestConfig fc;
      fc.seed = Rng::derive(seed, 0x5A6A);
      fc.jobs = jobs > 0 ? jobs : 1;
      bundle.uncertainty_model = train_random_forest(parts[0], fc);
    } else if (std::string(uncertainty) != "native") {
      return fail_with("unknown uncertainty source: " + std::string(uncertainty), UQX_INVALID_ARGUMENT);
    }

    *out = handle.release();
    return UQX_OK;
  });
}

uqx_status uqx_model_save(const uqx_model* model, const char* path) {
  if (!model || !path) return fail_with("null argument", UQX_INVALID_ARGUMENT);
  return guarded([&] {
    uqxai::save_bundle(path, model->bundle);
    return UQX_OK;
  });
}

uqx_status uqx_model_load(const char* path, uqx_model** out) {
  if (!path || !out) return fail_with("null argument", UQX_INVALID_ARGUMENT);
  return guarded([&] {
    auto handle = std::make_unique<uqx_model>();
    handle->bundle = uqxai::load_bundle(path);
    *out = handle.release();
    return UQX_OK;
  });
}

void uqx_model_free(uqx_model* model) { delete model; }

uqx_status uqx_model_info(const uqx_model* model, char* kind_buf, int kind_buf_len, int* n_features,
                          int* n_classes, int* member_count) {
  if (!model) return fail_with("null model", UQX_INVALID_ARGUMENT);
  const auto& m = *model->bundle.model;
  if (kind_buf && kind_buf_len > 0) {
    std::strncpy(kind_buf, m.kind().c_str(), static_cast<std::size_t>(kind_buf_len - 1));
    kind_buf[kind_buf_len - 1] = '\0';
  }
  if (n_features) *n_features = m.n_features();
  if (n_classes) *n_classes = m.n_classes();
  if (member_count) *member_count = model->bundle.uncertainty_source()->member_count();
  return UQX_OK;
}

uqx_status uqx_model_predict_proba(const uqx_model* model, const double* features, int64_t n_rows,
                                   int n_features, double* proba) {
  if (!model || !features || !proba) return fail_with("null argument", UQX_INVALID_ARGUMENT);
  return guarded([&] {
    const auto& bundle = model->bundle;
    uqxai::Matrix x = wrap_features(features, n_rows, n_features);
    if (bundle.standardizer) x = bundle.standardizer->apply(x);
    const uqxai::Matrix p = bundle.model->predict_proba(x);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.cols(); ++j) proba[i * p.cols() + j] = p(i, j);
    }
    return UQX_OK;
  });
}

uqx_status uqx_model_f1(const uqx_model* model, const uqx_dataset* dataset, double* f1) {
  if (!model || !dataset || !f1) return fail_with("null argument", UQX_INVALID_ARGUMENT);
  return guarded([&] {
    const auto& bundle = model->bundle;
    uqxai::Matrix x = dataset->data.features;
    if (bundle.standardizer) x = bundle.standardizer->apply(x);
    const auto pred = bundle.model->predict(x);
    *f1 = uqxai::weighted_f1(dataset->data.labels, pred, bundle.model->n_classes());
    return UQX_OK;
  });
}

uqx_status uqx_epistemic_scores(const uqx_model* model, const double* features, int64_t n_rows,
                                int n_features, const char* reduction, uint64_t seed, double* scores) {
  if (!model || !features || !reduction || !scores) return fail_with("null argument", UQX_INVALID_ARGUMENT);
  return guarded([&] {
    using namespace uqxai;
    ClassReduction red;
    if (std::string(reduction) == "predicted_class") {
      red = ClassReduction::predicted_class;
    } else if (std::string(reduction) == "mean_over_classes") {
      red = ClassReduction::mean_over_classes;
    } else {
      return fail_with("unknown reduction: " + std::string(reduction), UQX_INVALID_ARGUMENT);
    }
    const auto& bundle = model->bundle;
    Matrix x = wrap_features(features, n_rows, n_features);
    if (bundle.standardizer) x = bundle.standardizer->apply(x);
    EpistemicScores result;
    // a forest companion beside a non-forest predictor is the surrogate path
    if (bundle.uncertainty_model && bundle.uncertainty_model->kind() == "random_forest") {
      result = surrogate_epistemic(dynamic_cast<const RandomForest&>(*bundle.uncertainty_model), x, red);
    } else {
      result = native_epistemic(*bundle.uncertainty_source(), x, red, seed);
    }
    for (Eigen::Index i = 0; i < result.values.size(); ++i) scores[i] = result.values(i);
    return UQX_OK;
  });
}

uqx_status uqx_epistemic_summary(const double* scores, int64_t n, double* mean, double* std_out, double* cv,
                                 int* cv_defined) {
  if (!scores) return fail_with("null scores", UQX_INVALID_ARGUMENT);
  return guarded([&] {
    uqxai::Vector v(n);
    for (int64_t i = 0; i < n; ++i) v(i) = scores[i];
    const auto s = uqxai::epistemic_summary(v);
    if (mean) *mean = s.mean;
    if (std_out) *std_out = s.std;
    if (cv) *cv = s.cv;
    if (cv_defined) *cv_defined = s.cv_defined ? 1 : 0;
    return UQX_OK;
  });
}

namespace {

uqxai::AttributionVector explain_one(const uqxai::ModelBundle& bundle, const uqxai::BackgroundSet& background,
                                     const uqxai::Vector& train_stds, const std::string& method,
                                     const uqxai::Vector& x, uint64_t seed) {
  using namespace uqxai;
  const auto& model = *bundle.model;
  const int target = model.predict(x.transpose())[0];
  if (method == "tree_shap") {
    const auto* forest = dynamic_cast<const RandomForest*>(&model);
    require(forest != nullptr, "tree_shap needs a random forest model");
    return tree_shap(*forest, x, background, target);
  }
  if (method == "kernel_shap") {
    AttributionTarget at{target, OutputKind::probability};
    return kernel_shap(model, x, background, at, 2 * model.n_features() + 2048, seed);
  }
  if (method == "exact_shapley") {
    AttributionTarget at{target, OutputKind::probability};
    return exact_shapley_oracle(model, x, background, at);
  }
  if (method == "lime") {
    return lime(model, x, train_stds, target, LimeConfig{}, seed);
  }
  if (method == "ig") {
    return integrated_gradients(model, x, Vector::Zero(x.size()), 50, target);
  }
  if (method == "smoothgrad") {
    SmoothConfig sc;
    sc.base = SmoothBase::vanilla_gradient;
    sc.n_noise = 20;
    return smooth(model, x, target, sc, seed);
  }
  if (method == "smooth_ig") {
    SmoothConfig sc;
    sc.base = SmoothBase::integrated_gradients;
    sc.n_noise = 50;
    return smooth(model, x, target, sc, seed);
  }
  fail("unknown attribution method: " + method);
}

}  // namespace

uqx_status uqx_explain_dataset(const uqx_model* model, const uqx_dataset* dataset, const char* method,
                               int background_size, int64_t max_samples, uint64_t seed,
                               const char* out_csv_path) {
  if (!model || !dataset || !method || !out_csv_path) return fail_with("null argument", UQX_INVALID_ARGUMENT);
  return guarded([&] {
    using namespace uqxai;
    const auto& bundle = model->bundle;
    Matrix x = dataset->data.features;
    if (bundle.standardizer) x = bundle.standardizer->apply(x);
    const Eigen::Index n = max_samples > 0 ? std::min<Eigen::Index>(x.rows(), max_samples) : x.rows();

    const BackgroundSet background = BackgroundSet::sample(x, background_size, Rng::derive(seed, 0xB6));
    Vector stds(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double mean = x.col(j).mean();
      stds(j) = std::sqrt((x.col(j).array() - mean).square().mean());
      if (stds(j) <= 0.0) stds(j) = 1.0;
    }

    CsvTable table;
    table.header = {"sample", "method", "target_class", "model_evals"};
    for (Eigen::Index j = 0; j < x.cols(); ++j) table.header.push_back("phi_" + std::to_string(j));
    for (Eigen::Index i = 0; i < n; ++i) {
      const AttributionVector attr = explain_one(bundle, background, stds, method, x.row(i).transpose(), seed);
      std::vector<std::string> row = {std::to_string(i), method, std::to_string(attr.target_class),
                                      std::to_string(attr.model_evals)};
      for (Eigen::Index j = 0; j < attr.values.size(); ++j) row.push_back(format_double(attr.values(j)));
      table.rows.push_back(std::move(row));
    }
    write_csv(out_csv_path, table);
    return UQX_OK;
  });
}

uqx_status uqx_explain_row(const uqx_model* model, const uqx_dataset* background_source, const char* method,
                           int background_size, const double* x, int n_features, uint64_t seed, double* phi,
                           int64_t* model_evals) {
  if (!model || !background_source || !method || !x || !phi) return fail_with("null argument", UQX_INVALID_ARGUMENT);
  return guarded([&] {
    using namespace uqxai;
    const auto& bundle = model->bundle;
    Matrix bg = background_source->data.features;
    if (bundle.standardizer) bg = bundle.standardizer->apply(bg);
    const BackgroundSet background = BackgroundSet::sample(bg, background_size, Rng::derive(seed, 0xB6));
    Vector stds(bg.cols());
    for (Eigen::Index j = 0; j < bg.cols(); ++j) {
      const double mean = bg.col(j).mean();
      stds(j) = std::sqrt((bg.col(j).array() - mean).square().mean());
      if (stds(j) <= 0.0) stds(j) = 1.0;
    }
    Vector xv(n_features);
    for (int j = 0; j < n_features; ++j) xv(j) = x[j];
    if (bundle.standardizer) xv = bundle.standardizer->apply(xv.transpose()).row(0).transpose();
    const AttributionVector attr = explain_one(bundle, background, stds, method, xv, seed);
    for (Eigen::Index j = 0; j < attr.values.size(); ++j) phi[j] = attr.values(j);
    if (model_evals) *model_evals = attr.model_evals;
    return UQX_OK;
  });
}

uqx_status uqx_kendall_tau(const double* ranks_a, const double* ranks_b, int n, double* tau) {
  if (!ranks_a || !ranks_b || !tau) return fail_with("null argument", UQX_INVALID_ARGUMENT);
  return guarded([&] {
    uqxai::Vector a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a(i) = ranks_a[i];
      b(i) = ranks_b[i];
    }
    *tau = uqxai::kendall_tau(a, b);
    return UQX_OK;
  });
}

uqx_status uqx_spearman_rho(const double* a_in, const double* b_in, int n, double* rho, int* defined) {
  if (!a_in || !b_in || !rho) return fail_with("null argument", UQX_INVALID_ARGUMENT);
  return guarded([&] {
    uqxai::Vector a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a(i) = a_in[i];
      b(i) = b_in[i];
    }
    const auto result = uqxai::spearman_rho(a, b);
    if (defined) *defined = result ? 1 : 0;
    *rho = result.value_or(0.0);
    return UQX_OK;
  });
}

uqx_status uqx_abs_ranking(const double* phi, int n, double* ranks) {
  if (!phi || !ranks) return fail_with("null argument", UQX_INVALID_ARGUMENT);
  return guarded([&] {
    uqxai::Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = phi[i];
    const uqxai::Vector r = uqxai::abs_ranking(v);
    for (int i = 0; i < n; ++i) ranks[i] = r(i);
    return UQX_OK;
  });
}

uqx_status uqx_calibrate_threshold(const double* scores, int64_t n, double nu, double* threshold,
                                   int32_t* deferred_mask) {
  if (!scores || !threshold) return fail_with("null argument", UQX_INVALID_ARGUMENT);
  return guarded([&] {
    uqxai::Vector v(n);
    for (int64_t i = 0; i < n; ++i) v(i) = scores[i];
    const auto policy = uqxai::calibrate_threshold(v, nu);
    *threshold = policy.threshold;
    if (deferred_mask) {
      for (int64_t i = 0; i < n; ++i) deferred_mask[i] = policy.calibration_deferred[static_cast<std::size_t>(i)] ? 1 : 0;
    }
    return UQX_OK;
  });
}

uqx_status uqx_relative_cost(int64_t m_evals, int64_t d_evals, int native_ensemble, double nu, double* q) {
  if (!q) return fail_with("null argument", UQX_INVALID_ARGUMENT);
  return guarded([&] {
    uqxai::CostModel cost{m_evals, d_evals, native_ensemble != 0};
    *q = uqxai::relative_cost(cost, nu);
    return UQX_OK;
  });
}

uqx_status uqx_run_experiment(const char* config_path, const char* out_dir, int64_t seed_override,
                              int jobs_override) {
  if (!config_path || !out_dir) return fail_with("null argument", UQX_INVALID_ARGUMENT);
  return guarded([&] {
    auto cfg = uqxai::ExperimentConfig::from_config(uqxai::KeyValueConfig::from_file(config_path));
    if (seed_override > 0) cfg.seed = static_cast<uint64_t>(seed_override);
    if (jobs_override > 0) cfg.jobs = jobs_override;
    uqxai::run_experiment(cfg, out_dir);
    return UQX_OK;
  });
}

uqx_status uqx_oracle_check(int verbose, int* n_failures) {
  return guarded([&] {
    const int failures = uqxai::run_oracle_checks(verbose != 0);
    if (n_failures) *n_failures = failures;
    return failures == 0 ? UQX_OK : UQX_ERROR;
  });
}

}  // extern "C"
