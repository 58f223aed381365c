#pragma once

#include "attribution.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "gating.hpp"
#include "perturb.hpp"
#include "serialize.hpp"
#include "stability.hpp"
#include "uncertainty.hpp"

#include <string>

namespace uqxai {

// Everything a study needs to run: the standardized splits, trained model,
// uncertainty source, and the experiment knobs (all defaulted to the values
// the reports reproduce; overridable through the config file).
struct ExperimentConfig {
  std::string experiment;        // xec | stratified | gating | feature_removal | signal_mass
  std::string dataset_name;
  std::string csv_path;
  std::string schema_config;     // path; empty = schema inline keys
  std::string model_kind = "rf";       // lr | rf | mlp
  std::string uncertainty = "native";  // native | rf_surrogate
  std::string explainer = "tree_shap";
  ClassReduction reduction = ClassReduction::mean_over_classes;
  std::uint64_t seed = 42;
  int jobs = 1;

  // shared
  int n_eval_samples = 100;
  int background_size = 100;
  long kernel_coalitions = 0;  // 0 = 2d + 2048
  LimeConfig lime;

  // xec sweep
  PerturbationKind perturbation = PerturbationKind::gaussian;
  std::vector<double> levels;  // empty = the per-kind default grid
  int xd_seeds = 1;

  // stratified
  std::vector<double> strat_sigmas = {0.01, 0.05, 0.1};
  int strat_noise_seeds = 10;
  int strat_group_size = 50;

  // gating (mixed noise)
  int gating_samples = 500;
  int gating_noise_seeds = 5;
  std::vector<double> gating_sigmas;   // empty = {0.02k} k=1..10
  std::vector<double> pr_nu_grid = {0.9, 0.7, 0.5, 0.3, 0.1};
  std::vector<double> cost_nu_grid = {0.7, 0.5, 0.3, 0.0};

  // feature removal
  int removal_max_k = 5;
  int removal_group_size = 50;

  // signal mass
  std::vector<double> noise_ratios = {1.0, 2.0, 3.0};
  int signal_group_size = 50;

  static ExperimentConfig from_config(const KeyValueConfig& cfg);
  KeyValueConfig to_config() const;  // canonical snapshot for the report
};

std::vector<double> default_levels(PerturbationKind kind);

// prepared data + models for one (dataset, model) cell
struct ExperimentContext {
  TabularDataset train, val, test;  // standardized
  Standardizer standardizer;
  ModelBundle bundle;
  BackgroundSet background;
  long uq_evals_per_sample = 1;  // m in the cost model
};

ExperimentContext prepare_context(const ExperimentConfig& cfg);

// bound explainer closure for the configured method; target = predicted class
ExplainFn make_explainer(const ExperimentConfig& cfg, const ExperimentContext& ctx);

// epistemic scores for a batch through the configured uncertainty source
Vector epistemic_scores(const ExperimentConfig& cfg, const ExperimentContext& ctx, const Matrix& x,
                        std::uint64_t seed);

// Study runners; each writes its CSV outputs plus report.json under out_dir
// and returns the path of the primary CSV.
std::string run_correlation_study(const ExperimentConfig& cfg, const std::string& out_dir);
std::string run_stratified_validation(const ExperimentConfig& cfg, const std::string& out_dir);
std::string run_mixed_noise_gating(const ExperimentConfig& cfg, const std::string& out_dir);
std::string run_feature_removal(const ExperimentConfig& cfg, const std::string& out_dir);
std::string run_signal_mass(const ExperimentConfig& cfg, const std::string& out_dir);

// dispatcher on cfg.experiment
std::string run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

}  // namespace uqxai
