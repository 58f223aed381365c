/* uqxai: epistemic-uncertainty-gated explanation toolkit, C interface.
 *
 * Conventions:
 *  - every function returns uqx_status; UQX_OK is 0;
 *  - on failure, uqx_last_error() returns a thread-local message;
 *  - handles are opaque and freed with their matching *_free call;
 *  - feature inputs are raw (unstandardized); models remember the
 *    standardizer they were trained behind and apply it themselves;
 *  - matrices are row-major double buffers owned by the caller.
 */
#ifndef UQXAI_H
#define UQXAI_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  UQX_OK = 0,
  UQX_ERROR = 1,            /* runtime failure, see uqx_last_error() */
  UQX_INVALID_ARGUMENT = 2  /* bad inputs / unusable configuration */
} uqx_status;

const char* uqx_version(void);
const char* uqx_last_error(void);

/* ---- datasets -------------------------------------------------------- */

typedef struct uqx_dataset uqx_dataset;

/* CSV with header, comma delimiter, final column = label; the schema config
 * is a key = value file (see configs/). */
uqx_status uqx_dataset_load(const char* csv_path, const char* schema_config_path, uqx_dataset** out);

/* Gaussian features, binary labels y = 1 iff w.x > 0. */
uqx_status uqx_dataset_synth_linear(int n_features, int64_t n_rows, const double* weights, uint64_t seed,
                                    uqx_dataset** out);

uqx_status uqx_dataset_shape(const uqx_dataset* ds, int64_t* n_rows, int* n_features, int* n_classes);

/* copies out rows/labels; pass NULL to skip either */
uqx_status uqx_dataset_data(const uqx_dataset* ds, double* features, int32_t* labels);

uqx_status uqx_dataset_split(const uqx_dataset* ds, double train_frac, double val_frac, double test_frac,
                             uint64_t seed, uqx_dataset** train, uqx_dataset** val, uqx_dataset** test);

void uqx_dataset_free(uqx_dataset* ds);

/* ---- models ---------------------------------------------------------- */

typedef struct uqx_model uqx_model;

/* model_kind: "lr" | "rf" | "mlp"; uncertainty: "native" | "rf_surrogate".
 * Splits 70/15/15 with the given seed, fits the standardizer on the training
 * split, trains the model (plus the companion uncertainty model when
 * needed). */
uqx_status uqx_train(const char* model_kind, const char* uncertainty, const uqx_dataset* dataset,
                     uint64_t seed, int jobs, uqx_model** out);

uqx_status uqx_model_save(const uqx_model* model, const char* path);
uqx_status uqx_model_load(const char* path, uqx_model** out);
void uqx_model_free(uqx_model* model);
uqx_status uqx_model_info(const uqx_model* model, char* kind_buf, int kind_buf_len, int* n_features,
                          int* n_classes, int* member_count);

/* proba: n_rows x n_classes, row-major */
uqx_status uqx_model_predict_proba(const uqx_model* model, const double* features, int64_t n_rows,
                                   int n_features, double* proba);

/* weighted F1 against the dataset's labels */
uqx_status uqx_model_f1(const uqx_model* model, const uqx_dataset* dataset, double* f1);

/* ---- uncertainty ------------------------------------------------------ */

/* reduction: "predicted_class" | "mean_over_classes"; one score per row */
uqx_status uqx_epistemic_scores(const uqx_model* model, const double* features, int64_t n_rows,
                                int n_features, const char* reduction, uint64_t seed, double* scores);

/* mean, population std, cv; cv_defined is 0 when the mean is 0 */
uqx_status uqx_epistemic_summary(const double* scores, int64_t n, double* mean, double* std_out,
                                 double* cv, int* cv_defined);

/* ---- attribution ------------------------------------------------------ */

/* method: "tree_shap" | "kernel_shap" | "lime" | "ig" | "smoothgrad" |
 * "smooth_ig" | "exact_shapley". Explains the predicted class of each row and
 * writes one CSV row per sample (sample, method, target_class, model_evals,
 * phi_0..phi_{d-1}). Background/perturbation statistics are drawn from the
 * supplied dataset with the given seed. */
uqx_status uqx_explain_dataset(const uqx_model* model, const uqx_dataset* dataset, const char* method,
                               int background_size, int64_t max_samples, uint64_t seed,
                               const char* out_csv_path);

/* single-row attribution into phi[n_features] */
uqx_status uqx_explain_row(const uqx_model* model, const uqx_dataset* background_source, const char* method,
                           int background_size, const double* x, int n_features, uint64_t seed, double* phi,
                           int64_t* model_evals);

/* ---- stability metrics ------------------------------------------------ */

uqx_status uqx_kendall_tau(const double* ranks_a, const double* ranks_b, int n, double* tau);
uqx_status uqx_spearman_rho(const double* a, const double* b, int n, double* rho, int* defined);
uqx_status uqx_abs_ranking(const double* phi, int n, double* ranks);

/* ---- gating ------------------------------------------------------------ */

/* threshold such that exactly round(nu*n) scores (ties by index) gate high;
 * deferred_mask may be NULL */
uqx_status uqx_calibrate_threshold(const double* scores, int64_t n, double nu, double* threshold,
                                   int32_t* deferred_mask);

/* q = m/d + (1-nu), or 1/d + (1-nu) when native_ensemble */
uqx_status uqx_relative_cost(int64_t m_evals, int64_t d_evals, int native_ensemble, double nu, double* q);

/* ---- experiments ------------------------------------------------------- */

/* config_path: key = value experiment config; seed/jobs <= 0 keep the file's
 * values. Writes the study CSVs plus report.json under out_dir. */
uqx_status uqx_run_experiment(const char* config_path, const char* out_dir, int64_t seed_override,
                              int jobs_override);

/* ---- verification ------------------------------------------------------ */

/* Brute-force oracle suite: exact-Shapley vs tree/kernel paths,
 * finite-difference gradient checks, rank-metric closed forms. Returns UQX_OK
 * with *n_failures == 0 when everything agrees; prints one line per check to
 * stdout when verbose. */
uqx_status uqx_oracle_check(int verbose, int* n_failures);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* UQXAI_H */
