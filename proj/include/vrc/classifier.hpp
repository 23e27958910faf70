#pragma once

#include "vrc/training.hpp"

namespace vrc {

/// Shared per-point MLP, channelwise max pool, dense head.
struct ClassifierConfig {
  std::vector<Index> trunk{64, 128, 256};
  Index head_hidden = 128;
  std::vector<std::string> categories;

  Index num_classes() const { return static_cast<Index>(categories.size()); }
  Index label_of(const std::string& category) const;
  void validate() const;
};

nlohmann::ordered_json to_json(const ClassifierConfig& cfg);
ClassifierConfig classifier_config_from_json(const nlohmann::json& j);

/// Registers "cls.trunk.*" and "cls.head.*".
void add_classifier(ParamRegistry& reg, const ClassifierConfig& cfg, Rng& rng);

/// [1, #categories] logits for an [N, 3] cloud.
Tensor classify(const ParamRegistry& reg, const ClassifierConfig& cfg, const Tensor& cloud);
std::string predict(const ParamRegistry& reg, const ClassifierConfig& cfg, const Points& cloud);

/// -log softmax(logits)[label], shape [1].
Tensor cross_entropy(const Tensor& logits, Index label);

struct LabeledCloud {
  Points points;
  std::string category;
};

struct ClassifierTrainConfig {
  long steps = 200;
  Index batch_size = 8;  // 0: full batch
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

/// Adam on mean cross-entropy; returns the per-step batch loss.
std::vector<double> train_classifier(ParamRegistry& reg, const ClassifierConfig& cfg,
                                     const std::vector<LabeledCloud>& samples,
                                     const ClassifierTrainConfig& tc);

struct BenchReport {
  double acc_partial = 0.0;
  double avg_partial = 0.0;
  double acc_completed = 0.0;
  double avg_completed = 0.0;
  double acc_complete = 0.0;
  double avg_complete = 0.0;
  long count = 0;
};

nlohmann::ordered_json to_json(const BenchReport& r);

using Predictor = std::function<std::string(const Points&)>;

/// Accuracy (overall and per-category mean) of `predict` on the partial input,
/// the completion and the ground truth at `resolution`.
BenchReport classification_bench(const Predictor& predict, const Completer& complete,
                                 const std::vector<DatasetPair>& pairs,
                                 const std::vector<std::string>& categories, Index resolution);

void save_classifier(const ParamRegistry& reg, const ClassifierConfig& cfg,
                     const std::filesystem::path& prefix);
struct LoadedClassifier {
  ClassifierConfig config;
  ParamRegistry params;
};
LoadedClassifier load_classifier(const std::filesystem::path& checkpoint);

}  // namespace vrc
