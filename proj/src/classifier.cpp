#include "vrc/classifier.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace vrc {

Index ClassifierConfig::label_of(const std::string& category) const {
  auto it = std::find(categories.begin(), categories.end(), category);
  if (it == categories.end()) throw std::invalid_argument("classifier: unknown category '" + category + "'");
  return it - categories.begin();
}

void ClassifierConfig::validate() const {
  if (trunk.empty() || head_hidden < 1) throw std::invalid_argument("ClassifierConfig: empty trunk or head");
  for (Index w : trunk) {
    if (w < 1) throw std::invalid_argument("ClassifierConfig: widths must be positive");
  }
  if (categories.size() < 2) throw std::invalid_argument("ClassifierConfig: need at least two categories");
}

nlohmann::ordered_json to_json(const ClassifierConfig& cfg) {
  return {{"trunk", cfg.trunk}, {"head_hidden", cfg.head_hidden}, {"categories", cfg.categories}};
}

ClassifierConfig classifier_config_from_json(const nlohmann::json& j) {
  ClassifierConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "trunk") cfg.trunk = value.get<std::vector<Index>>();
    else if (key == "head_hidden") cfg.head_hidden = value.get<Index>();
    else if (key == "categories") cfg.categories = value.get<std::vector<std::string>>();
    else throw std::invalid_argument("classifier config: unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

void add_classifier(ParamRegistry& reg, const ClassifierConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<Index> widths{3};
  widths.insert(widths.end(), cfg.trunk.begin(), cfg.trunk.end());
  add_mlp(reg, "cls.trunk", widths, rng);
  add_mlp(reg, "cls.head", {cfg.trunk.back(), cfg.head_hidden, cfg.num_classes()}, rng);
}

Tensor classify(const ParamRegistry& reg, const ClassifierConfig& cfg, const Tensor& cloud) {
  if (cloud.rank() != 2 || cloud.dim(1) != 3) {
    throw ShapeError("classify: expected [N, 3] cloud, got " + to_string(cloud.shape()));
  }
  if (cloud.dim(0) == 0) throw std::invalid_argument("classify: empty point cloud");
  const Tensor local = mlp(reg, "cls.trunk", cfg.trunk.size(), cloud);
  const Tensor global = reshape(max_reduce(local, 0), {1, cfg.trunk.back()});
  return mlp(reg, "cls.head", 2, global, false);
}

std::string predict(const ParamRegistry& reg, const ClassifierConfig& cfg, const Points& cloud) {
  NoGradGuard guard;
  const Eigen::VectorXd logits = classify(reg, cfg, as_tensor(cloud)).values();
  Index best = 0;
  for (Index i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return cfg.categories[static_cast<std::size_t>(best)];
}

Tensor cross_entropy(const Tensor& logits, Index label) {
  if (label < 0 || label >= logits.size()) {
    throw IndexError("cross_entropy: label " + std::to_string(label) + " outside " +
                     std::to_string(logits.size()) + " classes");
  }
  const Tensor lp = reshape(log_softmax(reshape(logits, {1, logits.size()}), 1), {logits.size()});
  return scale(slice(lp, 0, label, label + 1), -1.0);
}

std::vector<double> train_classifier(ParamRegistry& reg, const ClassifierConfig& cfg,
                                     const std::vector<LabeledCloud>& samples,
                                     const ClassifierTrainConfig& tc) {
  if (samples.empty()) throw std::invalid_argument("train_classifier: no samples");
  if (tc.steps < 1 || tc.batch_size < 0 || !(tc.lr > 0.0)) {
    throw std::invalid_argument("train_classifier: bad training config");
  }
  std::vector<Index> labels;
  for (const auto& s : samples) labels.push_back(cfg.label_of(s.category));
  std::vector<Tensor> clouds;
  for (const auto& s : samples) clouds.push_back(as_tensor(s.points));

  Rng rng(derive_seed(tc.seed, "classifier"));
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch =
      tc.batch_size == 0 ? samples.size() : std::min<std::size_t>(tc.batch_size, samples.size());
  std::size_t cursor = order.size();
  AdamOptions opt;
  opt.lr = tc.lr;
  std::vector<double> losses;
  for (long step = 0; step < tc.steps; ++step) {
    Tensor total;
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        if (batch < samples.size()) std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const std::size_t i = order[cursor++];
      const Tensor l = cross_entropy(classify(reg, cfg, clouds[i]), labels[i]);
      total = total.defined() ? add(total, l) : l;
    }
    total = scale(total, 1.0 / static_cast<double>(batch));
    losses.push_back(total.item());
    adam_step(reg, reg.gradients(backward(total)), opt);
  }
  return losses;
}

nlohmann::ordered_json to_json(const BenchReport& r) {
  return {{"acc_partial", r.acc_partial},     {"avg_partial", r.avg_partial},
          {"acc_completed", r.acc_completed}, {"avg_completed", r.avg_completed},
          {"acc_complete", r.acc_complete},   {"avg_complete", r.avg_complete},
          {"count", r.count}};
}

BenchReport classification_bench(const Predictor& predict_fn, const Completer& complete,
                                 const std::vector<DatasetPair>& pairs,
                                 const std::vector<std::string>& categories, Index resolution) {
  if (pairs.empty()) throw std::invalid_argument("classification_bench: no pairs");
  std::vector<std::string> truth, partial, completed, full;
  for (const auto& p : pairs) {
    auto gt = p.complete.find(resolution);
    if (gt == p.complete.end()) {
      throw std::invalid_argument("classification_bench: pair " + p.pair_id + " has no " +
                                  std::to_string(resolution) + "-point ground truth");
    }
    truth.push_back(p.category);
    partial.push_back(predict_fn(p.partial));
    completed.push_back(predict_fn(complete(p, resolution)));
    full.push_back(predict_fn(*gt->second));
  }
  BenchReport r;
  r.count = static_cast<long>(pairs.size());
  const ClassificationScore sp = classification_metrics(partial, truth, categories);
  const ClassificationScore sc = classification_metrics(completed, truth, categories);
  const ClassificationScore sf = classification_metrics(full, truth, categories);
  r.acc_partial = sp.acc;
  r.avg_partial = sp.avg;
  r.acc_completed = sc.acc;
  r.avg_completed = sc.avg;
  r.acc_complete = sf.acc;
  r.avg_complete = sf.avg;
  return r;
}

void save_classifier(const ParamRegistry& reg, const ClassifierConfig& cfg,
                     const std::filesystem::path& prefix) {
  save_checkpoint(reg, prefix);
  const std::filesystem::path side = prefix.string() + ".model.json";
  std::ofstream os(side);
  if (!os) throw std::runtime_error("save_classifier: cannot write " + side.string());
  os << to_json(cfg).dump(2) << "\n";
}

LoadedClassifier load_classifier(const std::filesystem::path& checkpoint) {
  std::filesystem::path prefix = checkpoint_prefix(checkpoint);
  const std::string p = prefix.string();
  if (p.ends_with(".model.json")) prefix = p.substr(0, p.size() - 11);
  const std::filesystem::path side = prefix.string() + ".model.json";
  std::ifstream is(side);
  if (!is) throw std::runtime_error("load_classifier: cannot read model config " + side.string());
  LoadedClassifier c;
  try {
    c.config = classifier_config_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_classifier: " + side.string() + ": " + e.what());
  }
  Rng rng(0);
  add_classifier(c.params, c.config, rng);
  load_checkpoint(c.params, prefix);
  return c;
}

}  // namespace vrc
