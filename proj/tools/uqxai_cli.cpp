// Command-line front end. Links the C API only; all heavy lifting lives in
// the shared library.

#include <uqxai/uqxai.h>

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

[[noreturn]] void die(const std::string& message) {
  std::cerr << "error: " << message << "\n";
  std::exit(kExitRuntime);
}

void check(uqx_status status) {
  if (status != UQX_OK) die(uqx_last_error());
}

// --data paths resolve against UQXAI_DATA_DIR when not found as given
std::string resolve_data_path(const std::string& path) {
  if (fs::exists(path)) return path;
  if (const char* base = std::getenv("UQXAI_DATA_DIR")) {
    const fs::path candidate = fs::path(base) / path;
    if (fs::exists(candidate)) return candidate.string();
  }
  return path;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& entries) {
  fs::create_directories(out_dir);
  std::ofstream out(fs::path(out_dir) / "manifest.txt");
  if (!out.good()) die("cannot write manifest under " + out_dir);
  out << "command = " << command << "\n";
  out << "version = " << uqx_version() << "\n";
  for (const auto& [k, v] : entries) out << k << " = " << v << "\n";
}

struct DatasetHandle {
  uqx_dataset* ptr = nullptr;
  ~DatasetHandle() { uqx_dataset_free(ptr); }
};

struct ModelHandle {
  uqx_model* ptr = nullptr;
  ~ModelHandle() { uqx_model_free(ptr); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uqxai: uncertainty-gated explanation toolkit"};
  app.require_subcommand(1);

  std::string data_path, schema_path, model_kind = "rf", uncertainty = "native";
  std::string model_path, method = "tree_shap", reduction = "mean_over_classes";
  std::string out_dir = "out", config_path, scores_path, mode = "defer";
  std::uint64_t seed = 42;
  int jobs = 1;
  int background = 100;
  long max_samples = 0;
  double nu = 0.5;
  long m_evals = 50, d_evals = 5000;
  bool native_ensemble = false;
  bool quiet = false;

  auto* train = app.add_subcommand("train", "train a classifier bundle");
  train->add_option("--data", data_path, "dataset CSV")->required();
  train->add_option("--schema", schema_path, "schema config")->required();
  train->add_option("--model", model_kind, "lr | rf | mlp");
  train->add_option("--uncertainty", uncertainty, "native | rf_surrogate");
  train->add_option("--seed", seed);
  train->add_option("--jobs", jobs);
  train->add_option("--out", out_dir);

  auto* explain = app.add_subcommand("explain", "per-sample attributions");
  explain->add_option("--model", model_path, "model file")->required();
  explain->add_option("--data", data_path, "dataset CSV")->required();
  explain->add_option("--schema", schema_path, "schema config")->required();
  explain->add_option("--method", method);
  explain->add_option("--background", background);
  explain->add_option("--max-samples", max_samples);
  explain->add_option("--seed", seed);
  explain->add_option("--out", out_dir);

  auto* unc = app.add_subcommand("uncertainty", "per-sample epistemic scores");
  unc->add_option("--model", model_path)->required();
  unc->add_option("--data", data_path)->required();
  unc->add_option("--schema", schema_path)->required();
  unc->add_option("--reduction", reduction, "predicted_class | mean_over_classes");
  unc->add_option("--seed", seed);
  unc->add_option("--out", out_dir);

  auto* gate = app.add_subcommand("gate", "calibrate and apply the epistemic gate");
  gate->add_option("--scores", scores_path, "CSV from the uncertainty command")->required();
  gate->add_option("--nu", nu, "deferral rate in [0,1]");
  gate->add_option("--mode", mode, "route | defer");
  gate->add_option("--m", m_evals, "model evals per uncertainty estimate");
  gate->add_option("--d-evals", d_evals, "model evals per explanation");
  gate->add_flag("--native-ensemble", native_ensemble);
  gate->add_option("--out", out_dir);

  auto* experiment = app.add_subcommand("experiment", "run a study config");
  experiment->add_option("--config", config_path)->required();
  experiment->add_option("--seed", seed);
  experiment->add_option("--jobs", jobs);
  experiment->add_option("--out", out_dir);

  auto* oracle = app.add_subcommand("oracle-check", "run the verification oracles");
  oracle->add_flag("--quiet", quiet);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (train->parsed()) {
    DatasetHandle ds;
    check(uqx_dataset_load(resolve_data_path(data_path).c_str(), schema_path.c_str(), &ds.ptr));
    ModelHandle model;
    check(uqx_train(model_kind.c_str(), uncertainty.c_str(), ds.ptr, seed, jobs, &model.ptr));
    fs::create_directories(out_dir);
    const std::string model_file = (fs::path(out_dir) / "model.json").string();
    check(uqx_model_save(model.ptr, model_file.c_str()));
    write_manifest(out_dir, "train",
                   {{"data", data_path},
                    {"schema", schema_path},
                    {"model", model_kind},
                    {"uncertainty", uncertainty},
                    {"seed", std::to_string(seed)},
                    {"model_file", model_file}});
    std::cout << model_file << "\n";
    return kExitOk;
  }

  if (explain->parsed()) {
    ModelHandle model;
    check(uqx_model_load(model_path.c_str(), &model.ptr));
    DatasetHandle ds;
    check(uqx_dataset_load(resolve_data_path(data_path).c_str(), schema_path.c_str(), &ds.ptr));
    fs::create_directories(out_dir);
    const std::string csv = (fs::path(out_dir) / "attributions.csv").string();
    check(uqx_explain_dataset(model.ptr, ds.ptr, method.c_str(), background, max_samples, seed, csv.c_str()));
    write_manifest(out_dir, "explain",
                   {{"model", model_path},
                    {"data", data_path},
                    {"method", method},
                    {"background", std::to_string(background)},
                    {"seed", std::to_string(seed)},
                    {"attributions", csv}});
    std::cout << csv << "\n";
    return kExitOk;
  }

  if (unc->parsed()) {
    ModelHandle model;
    check(uqx_model_load(model_path.c_str(), &model.ptr));
    DatasetHandle ds;
    check(uqx_dataset_load(resolve_data_path(data_path).c_str(), schema_path.c_str(), &ds.ptr));
    int64_t n_rows = 0;
    int n_features = 0, n_classes = 0;
    check(uqx_dataset_shape(ds.ptr, &n_rows, &n_features, &n_classes));
    std::vector<double> features(static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(n_features));
    check(uqx_dataset_data(ds.ptr, features.data(), nullptr));
    std::vector<double> scores(static_cast<std::size_t>(n_rows));
    check(uqx_epistemic_scores(model.ptr, features.data(), n_rows, n_features, reduction.c_str(), seed,
                               scores.data()));
    double mean = 0, sd = 0, cv = 0;
    int cv_defined = 0;
    check(uqx_epistemic_summary(scores.data(), n_rows, &mean, &sd, &cv, &cv_defined));

    fs::create_directories(out_dir);
    const std::string csv = (fs::path(out_dir) / "epistemic.csv").string();
    std::ofstream out(csv);
    if (!out.good()) die("cannot write " + csv);
    out << "sample,value,reduction\n";
    out.precision(17);
    for (int64_t i = 0; i < n_rows; ++i) {
      out << i << ',' << scores[static_cast<std::size_t>(i)] << ',' << reduction << "\n";
    }
    write_manifest(out_dir, "uncertainty",
                   {{"model", model_path},
                    {"data", data_path},
                    {"reduction", reduction},
                    {"seed", std::to_string(seed)},
                    {"mean", std::to_string(mean)},
                    {"std", std::to_string(sd)},
                    {"cv", cv_defined ? std::to_string(cv) : "undefined"},
                    {"scores", csv}});
    std::cout << csv << "\n";
    return kExitOk;
  }

  if (gate->parsed()) {
    std::ifstream in(scores_path);
    if (!in.good()) die("cannot open scores: " + scores_path);
    std::vector<double> scores;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto first = line.find(',');
      const auto second = line.find(',', first + 1);
      if (first == std::string::npos) die("scores file is not the uncertainty CSV");
      scores.push_back(std::stod(line.substr(first + 1, second - first - 1)));
    }
    if (scores.empty()) die("no scores in " + scores_path);

    double threshold = 0;
    std::vector<int32_t> deferred(scores.size());
    check(uqx_calibrate_threshold(scores.data(), static_cast<int64_t>(scores.size()), nu, &threshold,
                                  deferred.data()));
    double q = 0;
    check(uqx_relative_cost(m_evals, d_evals, native_ensemble ? 1 : 0, nu, &q));

    fs::create_directories(out_dir);
    const std::string csv = (fs::path(out_dir) / "gate_decisions.csv").string();
    std::ofstream out(csv);
    out << "sample,score,decision\n";
    out.precision(17);
    long n_deferred = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const bool high = deferred[i] != 0;
      n_deferred += high ? 1 : 0;
      const char* decision = mode == "route" ? (high ? "expensive" : "cheap") : (high ? "defer" : "explain");
      out << i << ',' << scores[i] << ',' << decision << "\n";
    }
    const std::string report = (fs::path(out_dir) / "gate_report.json").string();
    std::ofstream rep(report);
    rep.precision(17);
    rep << "{\n  \"mode\": \"" << mode << "\",\n  \"nu\": " << nu << ",\n  \"threshold\": " << threshold
        << ",\n  \"achieved_nu\": " << static_cast<double>(n_deferred) / static_cast<double>(scores.size())
        << ",\n  \"q\": " << q << ",\n  \"m\": " << m_evals << ",\n  \"d\": " << d_evals
        << ",\n  \"native_ensemble\": " << (native_ensemble ? "true" : "false") << "\n}\n";
    write_manifest(out_dir, "gate",
                   {{"scores", scores_path},
                    {"nu", std::to_string(nu)},
                    {"mode", mode},
                    {"decisions", csv},
                    {"report", report}});
    std::cout << report << "\n";
    return kExitOk;
  }

  if (experiment->parsed()) {
    check(uqx_run_experiment(config_path.c_str(), out_dir.c_str(),
                             experiment->count("--seed") ? static_cast<int64_t>(seed) : 0,
                             experiment->count("--jobs") ? jobs : 0));
    write_manifest(out_dir, "experiment", {{"config", config_path}, {"out", out_dir}});
    std::cout << out_dir << "\n";
    return kExitOk;
  }

  if (oracle->parsed()) {
    int failures = 0;
    const uqx_status status = uqx_oracle_check(quiet ? 0 : 1, &failures);
    if (failures > 0 || status != UQX_OK) {
      std::cerr << failures << " oracle check(s) failed\n";
      return kExitRuntime;
    }
    std::cout << "all oracle checks passed\n";
    return kExitOk;
  }

  return kExitUsage;
}
