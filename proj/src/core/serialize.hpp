#pragma once

#include "dataset.hpp"
#include "model.hpp"

#include <optional>
#include <string>

namespace uqxai {

// What the train command produces: the predictor, an optional companion
// uncertainty model (bootstrap ensemble or RF surrogate; absent when the
// predictor estimates its own uncertainty), the standardizer it was fitted
// behind, and the schema it expects.
struct ModelBundle {
  ModelPtr model;
  ModelPtr uncertainty_model;  // may be null
  std::optional<Standardizer> standardizer;
  DatasetSchema schema;
  std::uint64_t train_seed = 0;

  // the model whose members drive epistemic scores
  ModelPtr uncertainty_source() const {
    if (uncertainty_model) return uncertainty_model;
    return model;
  }
};

// Self-describing JSON: architecture, parameters, seeds, standardizer.
// Identical bundles serialize to identical bytes.
void save_bundle(const std::string& path, const ModelBundle& bundle);
ModelBundle load_bundle(const std::string& path);

}  // namespace uqxai
