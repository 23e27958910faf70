#include "vrc/run_config.hpp"

#include <set>

namespace vrc {

namespace {

nlohmann::ordered_json dataset_json(const RunConfig& c) {
  const DatasetOptions& d = c.dataset;
  std::vector<std::string> fams;
  for (ShapeFamily f : c.families) fams.push_back(to_string(f));
  return {{"mode", to_string(d.mode)},
          {"divisor", d.divisor},
          {"base_resolutions", d.base_resolutions},
          {"base_partial_resolution", d.base_partial_resolution},
          {"missing_ratio", d.missing_ratio},
          {"test_fraction", d.test_fraction},
          {"camera_radius", d.camera_radius},
          {"hpr_gamma", d.hpr_gamma},
          {"jobs", d.jobs},
          {"families", fams},
          {"shapes_per_family", c.shapes_per_family}};
}

nlohmann::ordered_json train_json(const TrainConfig& t) {
  return {{"batch_size", t.batch_size},   {"epochs", t.epochs},
          {"max_steps", t.max_steps},     {"base_lr", t.base_lr},
          {"decay", t.decay},             {"decay_interval", t.decay_interval},
          {"seed", t.seed},               {"checkpoint_every", t.checkpoint_every}};
}

nlohmann::ordered_json loss_json(const LossWeights& w) {
  return {{"lambda_rec", w.lambda_rec},
          {"lambda_com", w.lambda_com},
          {"lambda_fine", w.lambda_fine},
          {"kl_lambda", w.kl_lambda}};
}

nlohmann::ordered_json classifier_json(const RunConfig& c) {
  return {{"trunk", c.classifier.trunk},
          {"head_hidden", c.classifier.head_hidden},
          {"steps", c.classifier_train.steps},
          {"batch_size", c.classifier_train.batch_size},
          {"lr", c.classifier_train.lr}};
}

void reject_unknown(const nlohmann::json& obj, const std::string& section,
                    std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw std::invalid_argument("config: section '" + section + "' must be an object");
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* a : keys) ok = ok || k == a;
    if (!ok) throw std::invalid_argument("config: unknown key '" + section + "." + k + "'");
  }
}

}  // namespace

nlohmann::ordered_json to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["dataset"] = dataset_json(cfg);
  j["train"] = train_json(cfg.train);
  j["loss"] = loss_json(cfg.loss);
  j["pmnet"] = to_json(cfg.model.pmnet);
  j["renet"] = to_json(cfg.model.renet);
  j["classifier"] = classifier_json(cfg);
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& patch, const RunConfig& base) {
  if (!patch.is_object()) throw std::invalid_argument("config: expected a JSON object");
  reject_unknown(patch, "", {"dataset", "train", "loss", "pmnet", "renet", "classifier"});
  nlohmann::json j = nlohmann::json(to_json(base));
  j.merge_patch(patch);

  RunConfig c = base;
  try {
    const auto& d = j["dataset"];
    reject_unknown(d, "dataset", {"mode", "divisor", "base_resolutions", "base_partial_resolution",
                                  "missing_ratio", "test_fraction", "camera_radius", "hpr_gamma",
                                  "jobs", "families", "shapes_per_family"});
    c.dataset.mode = dataset_mode_from_string(d["mode"].get<std::string>());
    c.dataset.divisor = d["divisor"].get<int>();
    c.dataset.base_resolutions = d["base_resolutions"].get<std::vector<Index>>();
    c.dataset.base_partial_resolution = d["base_partial_resolution"].get<Index>();
    c.dataset.missing_ratio = d["missing_ratio"].get<double>();
    c.dataset.test_fraction = d["test_fraction"].get<double>();
    c.dataset.camera_radius = d["camera_radius"].get<double>();
    c.dataset.hpr_gamma = d["hpr_gamma"].get<double>();
    c.dataset.jobs = d["jobs"].get<int>();
    c.families.clear();
    for (const auto& f : d["families"]) c.families.push_back(shape_family_from_string(f.get<std::string>()));
    c.shapes_per_family = d["shapes_per_family"].get<int>();
    c.dataset.validate();
    if (c.families.empty() || c.shapes_per_family < 1) {
      throw std::invalid_argument("config: dataset needs at least one family and one shape");
    }

    const auto& t = j["train"];
    reject_unknown(t, "train", {"batch_size", "epochs", "max_steps", "base_lr", "decay",
                                "decay_interval", "seed", "checkpoint_every"});
    c.train.batch_size = t["batch_size"].get<Index>();
    c.train.epochs = t["epochs"].get<long>();
    c.train.max_steps = t["max_steps"].get<long>();
    c.train.base_lr = t["base_lr"].get<double>();
    c.train.decay = t["decay"].get<double>();
    c.train.decay_interval = t["decay_interval"].get<long>();
    c.train.seed = t["seed"].get<std::uint64_t>();
    c.train.checkpoint_every = t["checkpoint_every"].get<long>();
    c.train.validate();

    const auto& l = j["loss"];
    reject_unknown(l, "loss", {"lambda_rec", "lambda_com", "lambda_fine", "kl_lambda"});
    c.loss.lambda_rec = l["lambda_rec"].get<double>();
    c.loss.lambda_com = l["lambda_com"].get<double>();
    c.loss.lambda_fine = l["lambda_fine"].get<double>();
    c.loss.kl_lambda = l["kl_lambda"].get<double>();
    c.loss.validate();

    c.model.pmnet = pmnet_config_from_json(j["pmnet"]);
    c.model.renet = renet_config_from_json(j["renet"]);

    const auto& k = j["classifier"];
    reject_unknown(k, "classifier", {"trunk", "head_hidden", "steps", "batch_size", "lr"});
    c.classifier.trunk = k["trunk"].get<std::vector<Index>>();
    c.classifier.head_hidden = k["head_hidden"].get<Index>();
    c.classifier_train.steps = k["steps"].get<long>();
    c.classifier_train.batch_size = k["batch_size"].get<Index>();
    c.classifier_train.lr = k["lr"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return c;
}

nlohmann::json override_patch(const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq || dot == 0 || dot + 1 == eq) {
    throw std::invalid_argument("override '" + assignment + "' is not section.key=value");
  }
  const std::string section = assignment.substr(0, dot);
  const std::string key = assignment.substr(dot + 1, eq - dot - 1);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }
  nlohmann::json patch;
  patch[section][key] = value;
  return patch;
}

std::vector<ShapeSpec> dataset_specs(const RunConfig& cfg, std::uint64_t seed) {
  std::vector<ShapeSpec> specs;
  for (ShapeFamily f : cfg.families) {
    Rng rng(derive_seed(derive_seed(seed, "shapes"), to_string(f)));
    for (int i = 0; i < cfg.shapes_per_family; ++i) specs.push_back(random_shape(f, rng));
  }
  return specs;
}

}  // namespace vrc
