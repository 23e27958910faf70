#pragma once

#include "vrc/classifier.hpp"

namespace vrc {

/// Everything a subcommand can be configured with. Sections: "dataset",
/// "train", "loss", "pmnet", "renet", "classifier".
struct RunConfig {
  DatasetOptions dataset;
  std::vector<ShapeFamily> families = all_shape_families();
  int shapes_per_family = 4;
  TrainConfig train;
  LossWeights loss;
  VRCNetConfig model;
  ClassifierConfig classifier;  // categories come from the data
  ClassifierTrainConfig classifier_train;
};

nlohmann::ordered_json to_json(const RunConfig& cfg);
/// Strict parse of a complete or partial config; absent keys keep the values
/// in `base`, unknown sections or keys throw.
RunConfig run_config_from_json(const nlohmann::json& j, const RunConfig& base = {});
/// "section.key=value" with a JSON value (bare words are taken as strings).
nlohmann::json override_patch(const std::string& assignment);

/// `shapes_per_family` jittered shapes for each configured family, seeded.
std::vector<ShapeSpec> dataset_specs(const RunConfig& cfg, std::uint64_t seed);

}  // namespace vrc
