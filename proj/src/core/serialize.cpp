#include "serialize.hpp"

#include "forest.hpp"
#include "logistic.hpp"
#include "mlp.hpp"

#include <json.hpp>

#include <fstream>

namespace uqxai {

using nlohmann::json;

namespace {

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Vector vector_from_json(const json& arr) {
  Vector v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  return v;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_to_json(m.row(i).transpose()));
  return rows;
}

Matrix matrix_from_json(const json& rows) {
  require(!rows.empty(), "model file: empty matrix");
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j].get<double>();
  }
  return m;
}

json logistic_to_json(const LogisticClassifier& m) {
  json j;
  j["kind"] = "logistic";
  j["weights"] = matrix_to_json(m.weights());
  j["bias"] = vector_to_json(m.bias());
  j["n_classes"] = m.n_classes();
  j["l2_strength"] = m.config().l2_strength;
  j["grad_tol"] = m.config().grad_tol;
  j["seed"] = m.config().seed;
  return j;
}

std::shared_ptr<LogisticClassifier> logistic_from_json(const json& j) {
  LogisticConfig cfg;
  cfg.l2_strength = j.at("l2_strength").get<double>();
  cfg.grad_tol = j.at("grad_tol").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return std::make_shared<LogisticClassifier>(matrix_from_json(j.at("weights")), vector_from_json(j.at("bias")),
                                              j.at("n_classes").get<int>(), cfg);
}

json forest_to_json(const RandomForest& m) {
  json j;
  j["kind"] = "random_forest";
  j["n_features"] = m.n_features();
  j["n_classes"] = m.n_classes();
  const auto& cfg = m.config();
  j["config"] = {{"n_trees", cfg.n_trees},
                 {"max_depth", cfg.max_depth},
                 {"min_samples_split", cfg.min_samples_split},
                 {"min_samples_leaf", cfg.min_samples_leaf},
                 {"seed", cfg.seed}};
  json trees = json::array();
  for (const auto& tree : m.trees()) {
    json nodes = json::array();
    for (const auto& node : tree.nodes()) {
      json n;
      n["f"] = node.feature;
      if (node.feature >= 0) {
        n["t"] = node.threshold;
        n["l"] = node.left;
        n["r"] = node.right;
      } else {
        n["p"] = vector_to_json(node.class_freq);
      }
      nodes.push_back(std::move(n));
    }
    trees.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees);
  return j;
}

std::shared_ptr<RandomForest> forest_from_json(const json& j);

json mlp_to_json(const MlpClassifier& m) {
  json j;
  j["kind"] = "mlp";
  const auto& cfg = m.config();
  j["config"] = {{"hidden", cfg.hidden},
                 {"dropout", cfg.dropout},
                 {"learning_rate", cfg.learning_rate},
                 {"batch_size", cfg.batch_size},
                 {"max_epochs", cfg.max_epochs},
                 {"patience", cfg.patience},
                 {"mc_members", cfg.mc_members},
                 {"seed", cfg.seed},
                 {"init", "uniform_fan_in"}};
  json ws = json::array(), bs = json::array();
  for (const auto& w : m.weights()) ws.push_back(matrix_to_json(w));
  for (const auto& b : m.biases()) bs.push_back(vector_to_json(b));
  j["weights"] = std::move(ws);
  j["biases"] = std::move(bs);
  return j;
}

std::shared_ptr<MlpClassifier> mlp_from_json(const json& j) {
  MlpConfig cfg;
  const json& c = j.at("config");
  cfg.hidden = c.at("hidden").get<std::vector<int>>();
  cfg.dropout = c.at("dropout").get<double>();
  cfg.learning_rate = c.at("learning_rate").get<double>();
  cfg.batch_size = c.at("batch_size").get<int>();
  cfg.max_epochs = c.at("max_epochs").get<int>();
  cfg.patience = c.at("patience").get<int>();
  cfg.mc_members = c.at("mc_members").get<int>();
  cfg.seed = c.at("seed").get<std::uint64_t>();
  std::vector<Matrix> w;
  std::vector<Vector> b;
  for (const auto& wj : j.at("weights")) w.push_back(matrix_from_json(wj));
  for (const auto& bj : j.at("biases")) b.push_back(vector_from_json(bj));
  return std::make_shared<MlpClassifier>(std::move(w), std::move(b), cfg);
}

std::shared_ptr<RandomForest> forest_from_json(const json& j) {
  ForestConfig cfg;
  const json& c = j.at("config");
  cfg.n_trees = c.at("n_trees").get<int>();
  cfg.max_depth = c.at("max_depth").get<int>();
  cfg.min_samples_split = c.at("min_samples_split").get<int>();
  cfg.min_samples_leaf = c.at("min_samples_leaf").get<int>();
  cfg.seed = c.at("seed").get<std::uint64_t>();
  const int n_classes = j.at("n_classes").get<int>();

  std::vector<DecisionTree> trees;
  for (const auto& tj : j.at("trees")) {
    std::vector<TreeNode> nodes;
    for (const auto& nj : tj) {
      TreeNode node;
      node.feature = nj.at("f").get<int>();
      if (node.feature >= 0) {
        node.threshold = nj.at("t").get<double>();
        node.left = nj.at("l").get<int>();
        node.right = nj.at("r").get<int>();
      } else {
        node.class_freq = vector_from_json(nj.at("p"));
        require(node.class_freq.size() == n_classes, "model file: leaf class count mismatch");
      }
      nodes.push_back(std::move(node));
    }
    trees.push_back(DecisionTree::from_nodes(std::move(nodes), n_classes));
  }
  return std::make_shared<RandomForest>(std::move(trees), j.at("n_features").get<int>(), n_classes, cfg);
}

json model_to_json(const ProbabilisticClassifier& model) {
  if (const auto* lr = dynamic_cast<const LogisticClassifier*>(&model)) return logistic_to_json(*lr);
  if (const auto* rf = dynamic_cast<const RandomForest*>(&model)) return forest_to_json(*rf);
  if (const auto* mlp = dynamic_cast<const MlpClassifier*>(&model)) return mlp_to_json(*mlp);
  if (const auto* bs = dynamic_cast<const BootstrapLogistic*>(&model)) {
    json j;
    j["kind"] = "logistic_bootstrap";
    json members = json::array();
    for (const auto& m : bs->members()) members.push_back(logistic_to_json(*m));
    j["members"] = std::move(members);
    return j;
  }
  fail("cannot serialize model kind: " + model.kind());
}

ModelPtr model_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "logistic") return logistic_from_json(j);
  if (kind == "random_forest") return forest_from_json(j);
  if (kind == "mlp") return mlp_from_json(j);
  if (kind == "logistic_bootstrap") {
    std::vector<std::shared_ptr<LogisticClassifier>> members;
    for (const auto& mj : j.at("members")) members.push_back(logistic_from_json(mj));
    return std::make_shared<BootstrapLogistic>(std::move(members));
  }
  fail("model file: unknown kind " + kind);
}

}  // namespace

void save_bundle(const std::string& path, const ModelBundle& bundle) {
  require(bundle.model != nullptr, "save_bundle: no model");
  json j;
  j["format"] = "uqxai-model";
  j["version"] = 1;
  j["train_seed"] = bundle.train_seed;
  j["model"] = model_to_json(*bundle.model);
  if (bundle.uncertainty_model) j["uncertainty_model"] = model_to_json(*bundle.uncertainty_model);
  if (bundle.standardizer) {
    j["standardizer"] = {{"means", vector_to_json(bundle.standardizer->means)},
                         {"stds", vector_to_json(bundle.standardizer->stds)}};
  }
  json schema;
  schema["name"] = bundle.schema.name;
  schema["n_features"] = bundle.schema.n_features;
  schema["n_classes"] = bundle.schema.n_classes;
  schema["feature_names"] = bundle.schema.feature_names;
  schema["class_names"] = bundle.schema.class_names;
  j["schema"] = std::move(schema);

  std::ofstream out(path);
  require(out.good(), "cannot open model file for writing: " + path);
  out << j.dump(0) << '\n';
}

ModelBundle load_bundle(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open model file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail("model file " + path + " is not valid JSON: " + e.what());
  }
  require(j.value("format", "") == "uqxai-model", "model file " + path + " has an unexpected format tag");

  ModelBundle bundle;
  bundle.train_seed = j.value("train_seed", std::uint64_t{0});
  bundle.model = model_from_json(j.at("model"));
  if (j.contains("uncertainty_model")) bundle.uncertainty_model = model_from_json(j.at("uncertainty_model"));
  if (j.contains("standardizer")) {
    Standardizer s;
    s.means = vector_from_json(j.at("standardizer").at("means"));
    s.stds = vector_from_json(j.at("standardizer").at("stds"));
    bundle.standardizer = std::move(s);
  }
  if (j.contains("schema")) {
    const json& s = j.at("schema");
    bundle.schema.name = s.value("name", "");
    bundle.schema.n_features = s.value("n_features", bundle.model->n_features());
    bundle.schema.n_classes = s.value("n_classes", bundle.model->n_classes());
    bundle.schema.feature_names = s.value("feature_names", std::vector<std::string>{});
    bundle.schema.class_names = s.value("class_names", std::vector<std::string>{});
  }
  return bundle;
}

}  // namespace uqxai
