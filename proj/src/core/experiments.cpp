#include "experiments.hpp"

#include "csv.hpp"
#include "logistic.hpp"
#include "mlp.hpp"
#include "rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <numeric>
#include <sstream>

namespace uqxai {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void parallel_for(long n, int jobs, const std::function<void(long)>& body) {
  jobs = std::max(1, jobs);
  if (jobs == 1 || n < 2 * jobs) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::future<void>> workers;
  workers.reserve(static_cast<std::size_t>(jobs));
  for (int w = 0; w < jobs; ++w) {
    workers.push_back(std::async(std::launch::async, [&] {
      for (long i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
    }));
  }
  for (auto& f : workers) f.get();
}

std::string fmt(double v) { return format_double(v); }

double clipped_log_odds(double p) {
  const double q = std::clamp(p, 1e-6, 1.0 - 1e-6);
  return std::log(q / (1.0 - q));
}

// mean over classes of squared log-odds shift
double log_odds_shift(const Vector& p_clean, const Vector& p_removed) {
  double acc = 0.0;
  for (Eigen::Index c = 0; c < p_clean.size(); ++c) {
    const double diff = clipped_log_odds(p_clean(c)) - clipped_log_odds(p_removed(c));
    acc += diff * diff;
  }
  return acc / static_cast<double>(p_clean.size());
}

std::uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open for hashing: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return fnv1a64(ss.str());
}

std::vector<std::size_t> seeded_subset(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k >= n) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  Rng rng(seed);
  return rng.sample_without_replacement(n, k);
}

Matrix rows_of(const Matrix& x, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

Matrix perturb_batch(const ExperimentConfig& cfg, const ExperimentContext& ctx, const Matrix& x,
                     PerturbationKind kind, double level, std::uint64_t seed) {
  switch (kind) {
    case PerturbationKind::gaussian:
      return gaussian_noise(x, level, seed);
    case PerturbationKind::missing: {
      const Vector train_medians = column_medians(ctx.train.features);
      return missing_values(x, level, seed, train_medians);
    }
    case PerturbationKind::permute:
      return permute_features(x, level, seed);
    case PerturbationKind::bim:
    case PerturbationKind::pgd:
    case PerturbationKind::cw: {
      AttackConfig attack;
      PerturbationSpec spec{kind, level, seed};
      const auto labels = ctx.bundle.model->predict(x);
      (void)cfg;
      return attack_batch(*ctx.bundle.model, x, labels, spec, attack);
    }
  }
  fail("perturb_batch: unhandled kind");
}

void write_report(const std::string& out_dir, const ExperimentConfig& cfg, const json& results) {
  const KeyValueConfig snapshot = cfg.to_config();
  std::uint64_t hash = fnv1a64(snapshot.canonical());
  if (!cfg.csv_path.empty()) hash ^= file_hash(cfg.csv_path);

  json j;
  j["config"] = json::object();
  for (const auto& [k, v] : snapshot.values()) j["config"][k] = v;
  char hash_hex[32];
  std::snprintf(hash_hex, sizeof hash_hex, "%016llx", static_cast<unsigned long long>(hash));
  j["provenance_hash"] = hash_hex;
  j["seed"] = cfg.seed;
  j["reduction"] = to_string(cfg.reduction);
  j["results"] = results;

  std::ofstream out(fs::path(out_dir) / "report.json");
  require(out.good(), "cannot write report.json under " + out_dir);
  out << j.dump(2) << '\n';
}

struct PreparedSubset {
  std::vector<std::size_t> indices;  // into the test split
  Matrix x;
  std::vector<AttributionVector> clean_attrs;
  std::vector<Vector> clean_ranks;
  Vector clean_epistemic;
  long explain_evals_per_sample = 0;
};

PreparedSubset prepare_subset(const ExperimentConfig& cfg, const ExperimentContext& ctx,
                              std::size_t n_samples, const ExplainFn& explain, std::uint64_t subset_seed) {
  PreparedSubset out;
  out.indices = seeded_subset(static_cast<std::size_t>(ctx.test.n_rows()), n_samples, subset_seed);
  out.x = rows_of(ctx.test.features, out.indices);
  out.clean_attrs.resize(out.indices.size());
  out.clean_ranks.resize(out.indices.size());
  parallel_for(static_cast<long>(out.indices.size()), cfg.jobs, [&](long i) {
    out.clean_attrs[static_cast<std::size_t>(i)] = explain(out.x.row(i).transpose());
    out.clean_ranks[static_cast<std::size_t>(i)] = abs_ranking(out.clean_attrs[static_cast<std::size_t>(i)].values);
  });
  long total_evals = 0;
  for (const auto& a : out.clean_attrs) total_evals += a.model_evals;
  out.explain_evals_per_sample = out.indices.empty() ? 0 : total_evals / static_cast<long>(out.indices.size());
  out.clean_epistemic = epistemic_scores(cfg, ctx, out.x, Rng::derive(cfg.seed, 0xC1EA7));
  return out;
}

}  // namespace

std::vector<double> default_levels(PerturbationKind kind) {
  switch (kind) {
    case PerturbationKind::gaussian: return {0.01, 0.05, 0.1, 0.3, 0.5, 1.0, 2.0};
    case PerturbationKind::missing: return {0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5};
    case PerturbationKind::permute: return {0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.25};
    case PerturbationKind::bim:
    case PerturbationKind::pgd: return {0.01, 0.05, 0.1, 0.2};
    case PerturbationKind::cw: return {0.1, 1.0, 10.0};
  }
  fail("default_levels: unhandled kind");
}

ExperimentConfig ExperimentConfig::from_config(const KeyValueConfig& cfg) {
  ExperimentConfig out;
  out.experiment = cfg.get("experiment");
  out.dataset_name = cfg.get_or("dataset", "");
  out.csv_path = cfg.get_or("csv", "");
  out.schema_config = cfg.get_or("schema_config", "");
  out.model_kind = cfg.get_or("model", "rf");
  out.uncertainty = cfg.get_or("uncertainty", "native");
  out.explainer = cfg.get_or("explainer", "tree_shap");
  const std::string reduction = cfg.get_or("reduction", "mean_over_classes");
  if (reduction == "predicted_class") {
    out.reduction = ClassReduction::predicted_class;
  } else if (reduction == "mean_over_classes") {
    out.reduction = ClassReduction::mean_over_classes;
  } else {
    fail("unknown reduction: " + reduction);
  }
  out.seed = static_cast<std::uint64_t>(cfg.get_int_or("seed", 42));
  out.jobs = static_cast<int>(cfg.get_int_or("jobs", 1));
  out.n_eval_samples = static_cast<int>(cfg.get_int_or("n_eval_samples", 100));
  out.background_size = static_cast<int>(cfg.get_int_or("background_size", 100));
  out.kernel_coalitions = cfg.get_int_or("kernel_coalitions", 0);
  out.lime.n_samples = cfg.get_int_or("lime_samples", 5000);
  out.lime.top_k = static_cast<int>(cfg.get_int_or("lime_top_k", 10));
  if (cfg.has("perturbation")) out.perturbation = perturbation_kind_from_string(cfg.get("perturbation"));
  if (cfg.has("levels")) out.levels = cfg.get_double_list("levels");
  out.xd_seeds = static_cast<int>(cfg.get_int_or("xd_seeds", 1));
  if (cfg.has("strat_sigmas")) out.strat_sigmas = cfg.get_double_list("strat_sigmas");
  out.strat_noise_seeds = static_cast<int>(cfg.get_int_or("strat_noise_seeds", 10));
  out.strat_group_size = static_cast<int>(cfg.get_int_or("strat_group_size", 50));
  out.gating_samples = static_cast<int>(cfg.get_int_or("gating_samples", 500));
  out.gating_noise_seeds = static_cast<int>(cfg.get_int_or("gating_noise_seeds", 5));
  if (cfg.has("gating_sigmas")) out.gating_sigmas = cfg.get_double_list("gating_sigmas");
  if (cfg.has("pr_nu_grid")) out.pr_nu_grid = cfg.get_double_list("pr_nu_grid");
  if (cfg.has("cost_nu_grid")) out.cost_nu_grid = cfg.get_double_list("cost_nu_grid");
  out.removal_max_k = static_cast<int>(cfg.get_int_or("removal_max_k", 5));
  out.removal_group_size = static_cast<int>(cfg.get_int_or("removal_group_size", 50));
  if (cfg.has("noise_ratios")) out.noise_ratios = cfg.get_double_list("noise_ratios");
  out.signal_group_size = static_cast<int>(cfg.get_int_or("signal_group_size", 50));
  return out;
}

KeyValueConfig ExperimentConfig::to_config() const {
  KeyValueConfig cfg;
  auto join = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ",";
      s += format_double(v[i]);
    }
    return s;
  };
  cfg.set("experiment", experiment);
  cfg.set("dataset", dataset_name);
  cfg.set("csv", csv_path);
  cfg.set("schema_config", schema_config);
  cfg.set("model", model_kind);
  cfg.set("uncertainty", uncertainty);
  cfg.set("explainer", explainer);
  cfg.set("reduction", to_string(reduction));
  cfg.set("seed", std::to_string(seed));
  cfg.set("n_eval_samples", std::to_string(n_eval_samples));
  cfg.set("background_size", std::to_string(background_size));
  cfg.set("kernel_coalitions", std::to_string(kernel_coalitions));
  cfg.set("lime_samples", std::to_string(lime.n_samples));
  cfg.set("lime_top_k", std::to_string(lime.top_k));
  cfg.set("perturbation", to_string(perturbation));
  cfg.set("levels", join(levels.empty() ? default_levels(perturbation) : levels));
  cfg.set("xd_seeds", std::to_string(xd_seeds));
  cfg.set("strat_sigmas", join(strat_sigmas));
  cfg.set("strat_noise_seeds", std::to_string(strat_noise_seeds));
  cfg.set("strat_group_size", std::to_string(strat_group_size));
  cfg.set("gating_samples", std::to_string(gating_samples));
  cfg.set("gating_noise_seeds", std::to_string(gating_noise_seeds));
  cfg.set("pr_nu_grid", join(pr_nu_grid));
  cfg.set("cost_nu_grid", join(cost_nu_grid));
  cfg.set("removal_max_k", std::to_string(removal_max_k));
  cfg.set("removal_group_size", std::to_string(removal_group_size));
  cfg.set("noise_ratios", join(noise_ratios));
  cfg.set("signal_group_size", std::to_string(signal_group_size));
  return cfg;
}

namespace {

TabularDataset load_for(const ExperimentConfig& cfg) {
  require(!cfg.csv_path.empty(), "experiment config needs csv = <path>");
  DatasetSchema schema;
  if (!cfg.schema_config.empty()) {
    schema = DatasetSchema::from_config(KeyValueConfig::from_file(cfg.schema_config));
  } else {
    fail("experiment config needs schema_config = <path>");
  }
  if (!cfg.dataset_name.empty()) schema.name = cfg.dataset_name;
  return load_dataset(cfg.csv_path, schema);
}

ExperimentContext build_context(const ExperimentConfig& cfg, const TabularDataset& raw) {
  ExperimentContext ctx;
  SplitSpec split_spec;
  split_spec.seed = cfg.seed;
  auto parts = split(raw, split_spec);
  ctx.standardizer = fit_standardizer(parts[0]);
  for (auto* part : {&parts[0], &parts[1], &parts[2]}) {
    part->features = ctx.standardizer.apply(part->features);
  }
  ctx.train = std::move(parts[0]);
  ctx.val = std::move(parts[1]);
  ctx.test = std::move(parts[2]);

  ctx.bundle.schema = raw.schema;
  ctx.bundle.standardizer = ctx.standardizer;
  ctx.bundle.train_seed = cfg.seed;

  if (cfg.model_kind == "rf") {
    ForestConfig fc;
    fc.seed = cfg.seed;
    fc.jobs = cfg.jobs;
    ctx.bundle.model = train_random_forest(ctx.train, fc);
  } else if (cfg.model_kind == "lr") {
    LogisticConfig lc;
    lc.seed = cfg.seed;
    ctx.bundle.model = train_logistic(ctx.train, lc);
    if (cfg.uncertainty == "native") {
      ctx.bundle.uncertainty_model = train_logistic_bootstrap(ctx.train, 20, cfg.seed, lc);
    }
  } else if (cfg.model_kind == "mlp") {
    MlpConfig mc;
    mc.seed = cfg.seed;
    ctx.bundle.model = train_mlp(ctx.train, ctx.val, mc);
  } else {
    fail("unknown model kind: " + cfg.model_kind);
  }

  if (cfg.uncertainty == "rf_surrogate") {
    ForestConfig fc;
    fc.seed = Rng::derive(cfg.seed, 0x5A6A);
    fc.jobs = cfg.jobs;
    ctx.bundle.uncertainty_model = train_random_forest(ctx.train, fc);
  } else {
    require(cfg.uncertainty == "native", "unknown uncertainty source: " + cfg.uncertainty);
  }

  const auto uq = ctx.bundle.uncertainty_source();
  require(uq->capabilities().has_members,
          "model " + cfg.model_kind + " has no native members; set uncertainty = rf_surrogate");
  ctx.uq_evals_per_sample = uq->member_count();

  ctx.background = BackgroundSet::sample(ctx.train.features, cfg.background_size, Rng::derive(cfg.seed, 0xB6));
  return ctx;
}

}  // namespace

ExperimentContext prepare_context(const ExperimentConfig& cfg) { return build_context(cfg, load_for(cfg)); }

ExplainFn make_explainer(const ExperimentConfig& cfg, const ExperimentContext& ctx) {
  const ModelPtr model = ctx.bundle.model;
  const std::string method = cfg.explainer;
  const std::uint64_t seed = Rng::derive(cfg.seed, 0xE791A1);

  if (method == "tree_shap") {
    auto forest = std::dynamic_pointer_cast<const RandomForest>(model);
    require(forest != nullptr, "tree_shap needs a random forest model");
    const BackgroundSet& bg = ctx.background;
    return [forest, &bg](const Vector& x) {
      const int target = forest->predict(x.transpose())[0];
      return tree_shap(*forest, x, bg, target);
    };
  }
  if (method == "kernel_shap") {
    long budget = cfg.kernel_coalitions;
    if (budget <= 0) budget = 2 * model->n_features() + 2048;
    const BackgroundSet& bg = ctx.background;
    return [model, &bg, budget, seed](const Vector& x) {
      AttributionTarget target{model->predict(x.transpose())[0], OutputKind::probability};
      return kernel_shap(*model, x, bg, target, budget, seed);
    };
  }
  if (method == "exact_shapley") {
    const BackgroundSet& bg = ctx.background;
    return [model, &bg](const Vector& x) {
      AttributionTarget target{model->predict(x.transpose())[0], OutputKind::probability};
      return exact_shapley_oracle(*model, x, bg, target);
    };
  }
  if (method == "lime") {
    Vector stds(ctx.train.n_features());
    for (Eigen::Index j = 0; j < ctx.train.n_features(); ++j) {
      const double mean = ctx.train.features.col(j).mean();
      stds(j) = std::sqrt((ctx.train.features.col(j).array() - mean).square().mean());
      if (stds(j) <= 0.0) stds(j) = 1.0;
    }
    const LimeConfig lime_cfg = cfg.lime;
    return [model, stds, lime_cfg, seed](const Vector& x) {
      const int target = model->predict(x.transpose())[0];
      return lime(*model, x, stds, target, lime_cfg, seed);
    };
  }
  if (method == "ig") {
    return [model](const Vector& x) {
      const int target = model->predict(x.transpose())[0];
      return integrated_gradients(*model, x, Vector::Zero(x.size()), 50, target);
    };
  }
  if (method == "smoothgrad" || method == "smooth_ig") {
    SmoothConfig sc;
    if (method == "smoothgrad") {
      sc.base = SmoothBase::vanilla_gradient;
      sc.n_noise = 20;
    } else {
      sc.base = SmoothBase::integrated_gradients;
      sc.n_noise = 50;
    }
    return [model, sc, seed](const Vector& x) {
      const int target = model->predict(x.transpose())[0];
      return smooth(*model, x, target, sc, seed);
    };
  }
  fail("unknown explainer: " + method);
}

Vector epistemic_scores(const ExperimentConfig& cfg, const ExperimentContext& ctx, const Matrix& x,
                        std::uint64_t seed) {
  const auto source = ctx.bundle.uncertainty_source();
  if (cfg.uncertainty == "rf_surrogate") {
    auto forest = std::dynamic_pointer_cast<const RandomForest>(source);
    require(forest != nullptr, "surrogate source is not a forest");
    return surrogate_epistemic(*forest, x, cfg.reduction).values;
  }
  return native_epistemic(*source, x, cfg.reduction, seed).values;
}

std::string run_correlation_study(const ExperimentConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  ExperimentContext ctx = prepare_context(cfg);
  ExplainFn explain = make_explainer(cfg, ctx);

  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(cfg.n_eval_samples),
                                              static_cast<std::size_t>(ctx.test.n_rows()));
  PreparedSubset subset = prepare_subset(cfg, ctx, n, explain, Rng::derive(cfg.seed, 0x5B5E7));

  const std::vector<double> levels = cfg.levels.empty() ? default_levels(cfg.perturbation) : cfg.levels;
  SweepCurve curve;
  CsvTable sweep;
  sweep.header = {"dataset", "model", "method", "perturbation", "level", "xd", "eg", "eg_ratio_form", "excluded"};
  int total_excluded = 0;

  for (std::size_t li = 0; li < levels.size(); ++li) {
    const double level = levels[li];
    std::vector<Matrix> perturbed;
    for (int s = 0; s < cfg.xd_seeds; ++s) {
      perturbed.push_back(perturb_batch(cfg, ctx, subset.x, cfg.perturbation, level,
                                        Rng::derive(cfg.seed, 1000 + li * 100 + static_cast<std::size_t>(s))));
    }
    XdResult xd = explanation_degradation_from_clean(explain, subset.clean_attrs, perturbed);
    double eg_acc = 0.0;
    bool ratio_form = true;
    for (std::size_t s = 0; s < perturbed.size(); ++s) {
      const Vector pert_scores =
          epistemic_scores(cfg, ctx, perturbed[s], Rng::derive(cfg.seed, 2000 + li * 100 + s));
      const EgResult eg = epistemic_growth(subset.clean_epistemic, pert_scores);
      eg_acc += eg.value;
      ratio_form = ratio_form && eg.ratio_form;
    }
    const double eg_value = eg_acc / static_cast<double>(perturbed.size());
    curve.levels.push_back(level);
    curve.xd.push_back(xd.value);
    curve.eg.push_back(eg_value);
    total_excluded += xd.excluded;
    sweep.rows.push_back({cfg.dataset_name, cfg.model_kind, cfg.explainer, to_string(cfg.perturbation),
                          fmt(level), fmt(xd.value), fmt(eg_value), ratio_form ? "1" : "0",
                          std::to_string(xd.excluded)});
  }

  const auto xec_value = xec(curve);
  CsvTable cells;
  cells.header = {"dataset", "model", "method", "perturbation", "xec", "defined"};
  cells.rows.push_back({cfg.dataset_name, cfg.model_kind, cfg.explainer, to_string(cfg.perturbation),
                        xec_value ? fmt(*xec_value) : "", xec_value ? "1" : "0"});

  const std::string cells_path = (fs::path(out_dir) / "fig2_xec.csv").string();
  write_csv(cells_path, cells);
  write_csv((fs::path(out_dir) / "fig2_sweep.csv").string(), sweep);

  json results;
  results["xec"] = xec_value ? json(*xec_value) : json();
  results["n_samples"] = subset.indices.size();
  results["excluded"] = total_excluded;
  results["explain_evals_per_sample"] = subset.explain_evals_per_sample;
  results["uq_evals_per_sample"] = ctx.uq_evals_per_sample;
  write_report(out_dir, cfg, results);
  return cells_path;
}

std::string run_stratified_validation(const ExperimentConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  ExperimentContext ctx = prepare_context(cfg);
  ExplainFn explain = make_explainer(cfg, ctx);

  // clean test-set epistemic, equal-sized tertiles, then a fixed draw per bin
  const Vector scores = epistemic_scores(cfg, ctx, ctx.test.features, Rng::derive(cfg.seed, 0xC1EA7));
  const std::size_t n_test = static_cast<std::size_t>(scores.size());
  std::vector<std::size_t> order(n_test);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores(static_cast<Eigen::Index>(a)) < scores(static_cast<Eigen::Index>(b)); });

  const std::size_t bin = n_test / 3;
  require(bin >= static_cast<std::size_t>(cfg.strat_group_size),
          "stratified validation: dataset too small for " + std::to_string(cfg.strat_group_size) +
              " samples per stratum");
  const char* stratum_names[3] = {"low", "medium", "high"};
  std::vector<std::vector<std::size_t>> groups(3);
  for (int g = 0; g < 3; ++g) {
    const std::size_t begin = g * bin;
    const std::size_t end = g == 2 ? n_test : begin + bin;
    std::vector<std::size_t> members(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
    Rng rng(Rng::derive(cfg.seed, 3000 + static_cast<std::uint64_t>(g)));
    const auto pick = rng.sample_without_replacement(members.size(), static_cast<std::size_t>(cfg.strat_group_size));
    for (auto p : pick) groups[static_cast<std::size_t>(g)].push_back(members[p]);
  }

  std::vector<std::size_t> all_idx;
  for (const auto& g : groups) all_idx.insert(all_idx.end(), g.begin(), g.end());
  const Matrix clean = rows_of(ctx.test.features, all_idx);

  std::vector<Vector> clean_ranks(all_idx.size());
  parallel_for(static_cast<long>(all_idx.size()), cfg.jobs, [&](long i) {
    clean_ranks[static_cast<std::size_t>(i)] = abs_ranking(explain(clean.row(i).transpose()).values);
  });

  CsvTable per_sample;
  per_sample.header = {"dataset", "sigma", "stratum", "test_index", "mean_tau"};
  CsvTable summary;
  summary.header = {"dataset", "sigma", "stratum", "mean", "median", "std"};

  for (std::size_t si = 0; si < cfg.strat_sigmas.size(); ++si) {
    const double sigma = cfg.strat_sigmas[si];
    Matrix tau_acc = Matrix::Zero(static_cast<Eigen::Index>(all_idx.size()), 1);
    for (int s = 0; s < cfg.strat_noise_seeds; ++s) {
      const Matrix noisy =
          gaussian_noise(clean, sigma, Rng::derive(cfg.seed, 4000 + si * 100 + static_cast<std::size_t>(s)));
      parallel_for(static_cast<long>(all_idx.size()), cfg.jobs, [&](long i) {
        const Vector ranks = abs_ranking(explain(noisy.row(i).transpose()).values);
        tau_acc(i, 0) += kendall_tau(clean_ranks[static_cast<std::size_t>(i)], ranks);
      });
    }
    tau_acc /= static_cast<double>(cfg.strat_noise_seeds);

    std::size_t at = 0;
    for (int g = 0; g < 3; ++g) {
      std::vector<double> values;
      for (std::size_t i = 0; i < groups[static_cast<std::size_t>(g)].size(); ++i, ++at) {
        const double tau = tau_acc(static_cast<Eigen::Index>(at), 0);
        values.push_back(tau);
        per_sample.rows.push_back({cfg.dataset_name, fmt(sigma), stratum_names[g],
                                   std::to_string(groups[static_cast<std::size_t>(g)][i]), fmt(tau)});
      }
      std::vector<double> sorted = values;
      std::sort(sorted.begin(), sorted.end());
      const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
      const double median = sorted.size() % 2 == 1
                                ? sorted[sorted.size() / 2]
                                : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
      double var = 0.0;
      for (double v : values) var += (v - mean) * (v - mean);
      var /= static_cast<double>(values.size());
      summary.rows.push_back(
          {cfg.dataset_name, fmt(sigma), stratum_names[g], fmt(mean), fmt(median), fmt(std::sqrt(var))});
    }
  }

  const std::string path = (fs::path(out_dir) / "fig3_strata.csv").string();
  write_csv(path, per_sample);
  write_csv((fs::path(out_dir) / "fig3_summary.csv").string(), summary);

  json results;
  results["n_per_stratum"] = cfg.strat_group_size;
  results["uq_evals_per_sample"] = ctx.uq_evals_per_sample;
  write_report(out_dir, cfg, results);
  return path;
}

std::string run_mixed_noise_gating(const ExperimentConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  ExperimentContext ctx = prepare_context(cfg);
  ExplainFn explain = make_explainer(cfg, ctx);

  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(cfg.gating_samples),
                                              static_cast<std::size_t>(ctx.test.n_rows()));
  PreparedSubset subset = prepare_subset(cfg, ctx, n, explain, Rng::derive(cfg.seed, 0x6A71));

  std::vector<double> sigmas = cfg.gating_sigmas;
  if (sigmas.empty()) {
    for (int k = 1; k <= 10; ++k) sigmas.push_back(0.02 * k);
  }

  // pooled mixed-noise population: one record per (sigma, sample), averaged
  // over noise seeds; epistemic computed on perturbed inputs
  std::vector<double> pool_epistemic, pool_tau, pool_sigma;
  for (std::size_t si = 0; si < sigmas.size(); ++si) {
    Vector epi_acc = Vector::Zero(static_cast<Eigen::Index>(n));
    Vector tau_acc = Vector::Zero(static_cast<Eigen::Index>(n));
    for (int s = 0; s < cfg.gating_noise_seeds; ++s) {
      const Matrix noisy =
          gaussian_noise(subset.x, sigmas[si], Rng::derive(cfg.seed, 5000 + si * 100 + static_cast<std::size_t>(s)));
      epi_acc += epistemic_scores(cfg, ctx, noisy, Rng::derive(cfg.seed, 6000 + si * 100 + static_cast<std::size_t>(s)));
      parallel_for(static_cast<long>(n), cfg.jobs, [&](long i) {
        const Vector ranks = abs_ranking(explain(noisy.row(i).transpose()).values);
        tau_acc(i) += kendall_tau(subset.clean_ranks[static_cast<std::size_t>(i)], ranks);
      });
    }
    epi_acc /= static_cast<double>(cfg.gating_noise_seeds);
    tau_acc /= static_cast<double>(cfg.gating_noise_seeds);
    for (std::size_t i = 0; i < n; ++i) {
      pool_epistemic.push_back(epi_acc(static_cast<Eigen::Index>(i)));
      pool_tau.push_back(tau_acc(static_cast<Eigen::Index>(i)));
      pool_sigma.push_back(sigmas[si]);
    }
  }

  const std::size_t pool_n = pool_epistemic.size();
  Vector pool_scores(static_cast<Eigen::Index>(pool_n));
  std::vector<bool> stable(pool_n);
  for (std::size_t i = 0; i < pool_n; ++i) {
    pool_scores(static_cast<Eigen::Index>(i)) = pool_epistemic[i];
    stable[i] = stability_label(std::clamp(pool_tau[i], -1.0, 1.0)) == StabilityLabel::stable;
  }

  CsvTable pr;
  pr.header = {"dataset", "model", "method", "nu", "precision", "recall", "n_accepted", "n_pool"};
  for (double nu : cfg.pr_nu_grid) {
    const GatePolicy policy = calibrate_threshold(pool_scores, nu);
    std::vector<bool> accepted(pool_n);
    for (std::size_t i = 0; i < pool_n; ++i) accepted[i] = !policy.calibration_deferred[i];
    const PrecisionRecall result = precision_recall(accepted, stable);
    long n_accepted = 0;
    for (bool a : accepted) n_accepted += a ? 1 : 0;
    pr.rows.push_back({cfg.dataset_name, cfg.model_kind, cfg.explainer, fmt(nu),
                       result.precision ? fmt(*result.precision) : "", result.recall ? fmt(*result.recall) : "",
                       std::to_string(n_accepted), std::to_string(pool_n)});
  }

  CostModel cost;
  cost.m = ctx.uq_evals_per_sample;
  cost.d_evals = std::max<long>(1, subset.explain_evals_per_sample);
  cost.native_ensemble = cfg.uncertainty == "native" && cfg.model_kind == "rf";

  CsvTable cost_rows;
  cost_rows.header = {"dataset",  "model",   "method",   "nu",        "mean_tau",
                      "std_tau",  "q",       "m_evals",  "d_evals",   "native_ensemble"};
  for (double nu : cfg.cost_nu_grid) {
    const GatePolicy policy = calibrate_threshold(pool_scores, nu);
    std::vector<double> kept;
    for (std::size_t i = 0; i < pool_n; ++i) {
      if (!policy.calibration_deferred[i]) kept.push_back(pool_tau[i]);
    }
    double mean = 0.0, sd = 0.0;
    if (!kept.empty()) {
      mean = std::accumulate(kept.begin(), kept.end(), 0.0) / static_cast<double>(kept.size());
      for (double v : kept) sd += (v - mean) * (v - mean);
      sd = std::sqrt(sd / static_cast<double>(kept.size()));
    }
    const double q = relative_cost(cost, nu);
    cost_rows.rows.push_back({cfg.dataset_name, cfg.model_kind, cfg.explainer, fmt(nu), fmt(mean), fmt(sd), fmt(q),
                              std::to_string(cost.m), std::to_string(cost.d_evals),
                              cost.native_ensemble ? "1" : "0"});
  }

  CsvTable scatter;
  scatter.header = {"dataset", "sigma", "epistemic", "tau", "stable"};
  for (std::size_t i = 0; i < pool_n; ++i) {
    scatter.rows.push_back({cfg.dataset_name, fmt(pool_sigma[i]), fmt(pool_epistemic[i]), fmt(pool_tau[i]),
                            stable[i] ? "1" : "0"});
  }

  const std::string pr_path = (fs::path(out_dir) / "tab3_pr.csv").string();
  write_csv(pr_path, pr);
  write_csv((fs::path(out_dir) / "tab4_cost.csv").string(), cost_rows);
  write_csv((fs::path(out_dir) / "figB_scatter.csv").string(), scatter);

  json results;
  results["pool_size"] = pool_n;
  results["m_evals"] = cost.m;
  results["d_evals"] = cost.d_evals;
  results["native_ensemble"] = cost.native_ensemble;
  json cuts = json::object();
  for (double nu : {0.3, 0.5, 0.7}) {
    cuts[format_double(nu)] = calibrate_threshold(pool_scores, nu).threshold;
  }
  results["nu_cut_thresholds"] = cuts;
  write_report(out_dir, cfg, results);
  return pr_path;
}

std::string run_feature_removal(const ExperimentConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  ExperimentContext ctx = prepare_context(cfg);
  ExplainFn explain = make_explainer(cfg, ctx);

  const Vector scores = epistemic_scores(cfg, ctx, ctx.test.features, Rng::derive(cfg.seed, 0xC1EA7));
  const std::size_t n_test = static_cast<std::size_t>(scores.size());
  const std::size_t g = static_cast<std::size_t>(cfg.removal_group_size);
  require(n_test >= 3 * g, "feature removal: dataset too small for three groups");

  std::vector<std::size_t> order(n_test);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores(static_cast<Eigen::Index>(a)) < scores(static_cast<Eigen::Index>(b)); });

  std::vector<std::size_t> lowest(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(g));
  std::vector<std::size_t> highest(order.end() - static_cast<std::ptrdiff_t>(g), order.end());
  std::vector<std::size_t> middle(order.begin() + static_cast<std::ptrdiff_t>(g),
                                  order.end() - static_cast<std::ptrdiff_t>(g));
  Rng rng(Rng::derive(cfg.seed, 0x7A2D));
  const auto pick = rng.sample_without_replacement(middle.size(), g);
  std::vector<std::size_t> random_group;
  for (auto p : pick) random_group.push_back(middle[p]);

  const Vector train_medians = column_medians(ctx.train.features);

  CsvTable out_rows;
  out_rows.header = {"dataset", "group", "k", "test_index", "log_odds_mse"};
  struct Group {
    const char* name;
    const std::vector<std::size_t>& idx;
  };
  const Group group_list[3] = {{"low", lowest}, {"high", highest}, {"random", random_group}};

  for (const auto& group : group_list) {
    const Matrix x = rows_of(ctx.test.features, group.idx);
    const Matrix p_clean = ctx.bundle.model->predict_proba(x);
    std::vector<std::vector<double>> shifts(group.idx.size(),
                                            std::vector<double>(static_cast<std::size_t>(cfg.removal_max_k)));
    parallel_for(static_cast<long>(group.idx.size()), cfg.jobs, [&](long i) {
      const Vector xi = x.row(i).transpose();
      const AttributionVector attr = explain(xi);
      std::vector<int> feat_order(static_cast<std::size_t>(xi.size()));
      std::iota(feat_order.begin(), feat_order.end(), 0);
      std::stable_sort(feat_order.begin(), feat_order.end(), [&](int a, int b) {
        return std::abs(attr.values(a)) > std::abs(attr.values(b));
      });
      Vector removed = xi;
      for (int k = 1; k <= cfg.removal_max_k; ++k) {
        const int feature = feat_order[static_cast<std::size_t>(k - 1)];
        removed(feature) = train_medians(feature);
        const Matrix p_removed = ctx.bundle.model->predict_proba(removed.transpose());
        shifts[static_cast<std::size_t>(i)][static_cast<std::size_t>(k - 1)] =
            log_odds_shift(p_clean.row(i).transpose(), p_removed.row(0).transpose());
      }
    });
    for (std::size_t i = 0; i < group.idx.size(); ++i) {
      for (int k = 1; k <= cfg.removal_max_k; ++k) {
        out_rows.rows.push_back({cfg.dataset_name, group.name, std::to_string(k),
                                 std::to_string(group.idx[i]),
                                 fmt(shifts[i][static_cast<std::size_t>(k - 1)])});
      }
    }
  }

  const std::string path = (fs::path(out_dir) / "fig4_removal.csv").string();
  write_csv(path, out_rows);

  json results;
  results["group_size"] = cfg.removal_group_size;
  results["max_k"] = cfg.removal_max_k;
  write_report(out_dir, cfg, results);
  return path;
}

std::string run_signal_mass(const ExperimentConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const TabularDataset raw = load_for(cfg);
  const int d_signal = static_cast<int>(raw.n_features());

  CsvTable out_rows;
  out_rows.header = {"dataset", "model", "ratio", "group", "test_index", "signal_mass", "zero_total"};
  int zero_total_flags = 0;

  for (std::size_t ri = 0; ri < cfg.noise_ratios.size(); ++ri) {
    const double ratio = cfg.noise_ratios[ri];
    const int d_noise = static_cast<int>(std::llround(ratio * d_signal));

    // append standard-normal noise features to the raw data, then rerun the
    // whole pipeline (split, standardize, train) on the augmented dataset
    TabularDataset augmented = raw;
    augmented.schema.n_features = d_signal + d_noise;
    Rng noise_rng(Rng::derive(cfg.seed, 8000 + ri));
    Matrix features(raw.features.rows(), d_signal + d_noise);
    features.leftCols(d_signal) = raw.features;
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
      for (int j = 0; j < d_noise; ++j) features(i, d_signal + j) = noise_rng.normal();
    }
    augmented.features = std::move(features);
    for (int j = 0; j < d_noise; ++j) {
      augmented.schema.feature_names.push_back("noise_" + std::to_string(j));
    }

    ExperimentContext ctx = build_context(cfg, augmented);
    ExplainFn explain = make_explainer(cfg, ctx);

    const Vector scores = epistemic_scores(cfg, ctx, ctx.test.features, Rng::derive(cfg.seed, 0xC1EA7));
    const std::size_t n_test = static_cast<std::size_t>(scores.size());
    const std::size_t g = static_cast<std::size_t>(cfg.signal_group_size);
    require(n_test >= 3 * g, "signal mass: dataset too small for three groups");

    std::vector<std::size_t> order(n_test);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores(static_cast<Eigen::Index>(a)) < scores(static_cast<Eigen::Index>(b)); });
    std::vector<std::size_t> lowest(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(g));
    std::vector<std::size_t> highest(order.end() - static_cast<std::ptrdiff_t>(g), order.end());
    std::vector<std::size_t> middle(order.begin() + static_cast<std::ptrdiff_t>(g),
                                    order.end() - static_cast<std::ptrdiff_t>(g));
    Rng rng(Rng::derive(cfg.seed, 9000 + ri));
    const auto pick = rng.sample_without_replacement(middle.size(), g);
    std::vector<std::size_t> random_group;
    for (auto p : pick) random_group.push_back(middle[p]);

    struct Group {
      const char* name;
      const std::vector<std::size_t>& idx;
    };
    const Group group_list[3] = {{"low", lowest}, {"high", highest}, {"random", random_group}};
    for (const auto& group : group_list) {
      const Matrix x = rows_of(ctx.test.features, group.idx);
      std::vector<double> masses(group.idx.size());
      std::vector<bool> zero_total(group.idx.size(), false);
      parallel_for(static_cast<long>(group.idx.size()), cfg.jobs, [&](long i) {
        const AttributionVector attr = explain(x.row(i).transpose());
        double signal = 0.0, total = 0.0;
        for (Eigen::Index j = 0; j < attr.values.size(); ++j) {
          const double a = std::abs(attr.values(j));
          total += a;
          if (j < d_signal) signal += a;
        }
        if (total > 0.0) {
          masses[static_cast<std::size_t>(i)] = signal / total;
        } else {
          masses[static_cast<std::size_t>(i)] = 0.0;
          zero_total[static_cast<std::size_t>(i)] = true;
        }
      });
      for (std::size_t i = 0; i < group.idx.size(); ++i) {
        if (zero_total[i]) ++zero_total_flags;
        out_rows.rows.push_back({cfg.dataset_name, cfg.model_kind, fmt(ratio), group.name,
                                 std::to_string(group.idx[i]), fmt(masses[i]), zero_total[i] ? "1" : "0"});
      }
    }
  }

  const std::string path = (fs::path(out_dir) / "figC_signalmass.csv").string();
  write_csv(path, out_rows);

  json results;
  results["zero_total_flags"] = zero_total_flags;
  results["d_signal"] = d_signal;
  write_report(out_dir, cfg, results);
  return path;
}

std::string run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
  if (cfg.experiment == "xec") return run_correlation_study(cfg, out_dir);
  if (cfg.experiment == "stratified") return run_stratified_validation(cfg, out_dir);
  if (cfg.experiment == "gating") return run_mixed_noise_gating(cfg, out_dir);
  if (cfg.experiment == "feature_removal") return run_feature_removal(cfg, out_dir);
  if (cfg.experiment == "signal_mass") return run_signal_mass(cfg, out_dir);
  fail("unknown experiment: " + cfg.experiment);
}

}  // namespace uqxai
