#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "vrc/gradcheck.hpp"
#include "vrc/io.hpp"
#include "vrc/run_config.hpp"

namespace fs = std::filesystem;
using namespace vrc;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Failure inside a named stage; reported as "vrckit <stage>: ...".
struct StageError : std::runtime_error {
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(what), stage(std::move(stage)) {}
  std::string stage;
};

template <class F>
auto stage(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::uint64_t default_seed() {
  const char* env = std::getenv("VRCKIT_SEED");
  if (env == nullptr || *env == '\0') return 0;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string("VRCKIT_SEED is not an unsigned integer: ") + env);
  }
}

// Options every configurable subcommand accepts.
struct ConfigFlags {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "JSON run configuration")->check(CLI::ExistingFile);
    app->add_option("--set", overrides, "override as section.key=value (repeatable)");
    app->add_option("--seed", seed, "base seed (default: $VRCKIT_SEED or 0)");
  }

  // defaults < config file < flags
  RunConfig resolve(nlohmann::json flag_patch = nlohmann::json::object()) const {
    RunConfig cfg;
    cfg.train.seed = default_seed();
    try {
      if (!config_file.empty()) {
        std::ifstream is(config_file);
        if (!is) throw UsageError("cannot read config " + config_file);
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(is);
        } catch (const nlohmann::json::parse_error& e) {
          throw UsageError("config " + config_file + ": " + e.what());
        }
        cfg = run_config_from_json(j, cfg);
      }
      for (const auto& o : overrides) flag_patch.merge_patch(override_patch(o));
      if (seed) flag_patch["train"]["seed"] = *seed;
      cfg = run_config_from_json(flag_patch, cfg);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return cfg;
  }
};

void echo_config(const RunConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream os(dir / "config.json");
  if (!os) throw std::runtime_error("cannot write " + (dir / "config.json").string());
  os << to_json(cfg).dump(2) << "\n";
}

// Effective configuration of a run that reads a checkpoint and/or a dataset.
RunConfig loaded_config(const VRCNetConfig* model, const Manifest* manifest) {
  RunConfig cfg;
  if (model) cfg.model = *model;
  if (manifest) {
    cfg.dataset.mode = manifest->mode;
    cfg.dataset.divisor = manifest->divisor;
  }
  return cfg;
}

// Echo next to a report or output prefix; nothing when there is no output path.
void echo_beside(const RunConfig& cfg, const std::string& out) {
  if (out.empty()) return;
  const fs::path dir = fs::path(out).parent_path();
  echo_config(cfg, dir.empty() ? fs::path(".") : dir);
}

void write_json(const nlohmann::ordered_json& j, const std::string& out) {
  std::cout << j.dump(2) << "\n";
  if (out.empty()) return;
  const fs::path p(out);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + out);
  os << j.dump(2) << "\n";
}

std::vector<DatasetPair> select_split(const std::vector<DatasetPair>& pairs, const std::string& split) {
  std::vector<DatasetPair> out;
  for (const auto& p : pairs) {
    if (split == "all" || to_string(p.split) == split) out.push_back(p);
  }
  return out;
}

// "auto": the test split when the dataset has one, otherwise everything.
std::vector<DatasetPair> eval_pairs(const std::vector<DatasetPair>& pairs, const std::string& split) {
  if (split != "auto") return select_split(pairs, split);
  auto test = select_split(pairs, "test");
  return test.empty() ? pairs : test;
}

LoadedDataset load_data(const std::string& dir) {
  return stage("load-data", [&] { return load_dataset(dir); });
}

// --- synth-data ---

struct SynthArgs {
  ConfigFlags flags;
  std::string mode;
  std::string out;
  std::optional<int> divisor;
  std::optional<int> jobs;
};

int run_synth(const SynthArgs& a) {
  nlohmann::json patch = nlohmann::json::object();
  if (!a.mode.empty()) patch["dataset"]["mode"] = a.mode;
  if (a.divisor) patch["dataset"]["divisor"] = *a.divisor;
  if (a.jobs) patch["dataset"]["jobs"] = *a.jobs;
  const RunConfig cfg = a.flags.resolve(patch);
  const std::uint64_t seed = cfg.train.seed;

  const Dataset ds = stage("synth-data", [&] {
    return build_dataset(dataset_specs(cfg, seed), cfg.dataset, seed);
  });
  const Manifest m = stage("write-dataset", [&] {
    auto manifest = save_dataset(ds, a.out, "vrc-" + to_string(cfg.dataset.mode));
    echo_config(cfg, a.out);
    return manifest;
  });
  std::cout << "pairs: " << m.records.size() << "\n"
            << "manifest: " << (fs::path(a.out) / "manifest.json").string() << "\n"
            << "manifest_sha256: " << manifest_hash(m) << "\n";
  return 0;
}

// --- train ---

struct TrainArgs {
  ConfigFlags flags;
  std::string data;
  std::string out;
  std::string task = "completion";
};

int run_train(const TrainArgs& a) {
  RunConfig cfg = a.flags.resolve();
  const LoadedDataset data = load_data(a.data);
  const auto pairs = select_split(data.pairs, "train");
  if (pairs.empty()) throw StageError("train", "dataset " + a.data + " has no train pairs");
  stage("train", [&] { echo_config(cfg, a.out); });

  if (a.task == "classifier") {
    std::set<std::string> cats;
    for (const auto& p : data.pairs) cats.insert(p.category);
    cfg.classifier.categories.assign(cats.begin(), cats.end());
    const Index res = data.manifest.partial_resolution;
    std::vector<LabeledCloud> samples;
    std::set<std::string> seen;
    for (const auto& p : pairs) {
      if (!seen.insert(p.shape_id).second) continue;
      auto it = p.complete.find(res);
      if (it == p.complete.end()) {
        throw StageError("train", "no ground truth at " + std::to_string(res) + " for " + p.pair_id);
      }
      samples.push_back({*it->second, p.category});
    }
    ClassifierTrainConfig tc = cfg.classifier_train;
    tc.seed = derive_seed(cfg.train.seed, "classifier");
    ParamRegistry reg;
    Rng rng(derive_seed(cfg.train.seed, "classifier-init"));
    add_classifier(reg, cfg.classifier, rng);
    const auto losses = stage("train", [&] { return train_classifier(reg, cfg.classifier, samples, tc); });
    stage("save-checkpoint", [&] { save_classifier(reg, cfg.classifier, fs::path(a.out) / "classifier"); });
    std::cout << "classifier steps: " << losses.size() << " final loss: "
              << (losses.empty() ? 0.0 : losses.back()) << "\n";
    return 0;
  }

  ParamRegistry reg;
  Rng rng(derive_seed(cfg.train.seed, "init"));
  add_vrcnet(reg, cfg.model, rng);
  cfg.train.out_dir = a.out;
  const fs::path log_path = fs::path(a.out) / "train_log.jsonl";
  std::ofstream log(log_path);
  if (!log) throw StageError("train", "cannot write " + log_path.string());
  const auto records = stage("train", [&] { return fit(reg, cfg.model, pairs, cfg.train, cfg.loss, &log); });
  if (!records.empty()) std::cout << to_json(records.back()).dump() << "\n";
  std::cout << "checkpoint: " << (fs::path(a.out) / "final").string() << "\n";
  return 0;
}

// --- eval ---

struct EvalArgs {
  std::string ckpt;
  std::string data;
  std::vector<Index> resolutions;
  std::string split = "auto";
  std::string out;
  double tau = 0.01;
};

int run_eval(const EvalArgs& a) {
  const LoadedModel model = stage("load-checkpoint", [&] { return load_model(a.ckpt); });
  const LoadedDataset data = load_data(a.data);
  std::vector<Index> res = a.resolutions;
  if (res.empty()) {
    for (Index r : data.manifest.resolutions) {
      if (r <= model.config.max_output(data.manifest.partial_resolution)) res.push_back(r);
    }
  }
  const auto pairs = eval_pairs(data.pairs, a.split);
  if (pairs.empty()) throw StageError("eval", "no pairs in split " + a.split);
  const auto reports = stage("eval", [&] {
    return evaluate(vrcnet_completer(model.params, model.config), pairs, res, a.tau);
  });
  stage("write-report", [&] {
    write_json(to_json(reports), a.out);
    echo_beside(loaded_config(&model.config, &data.manifest), a.out);
  });
  return 0;
}

// --- complete ---

struct CompleteArgs {
  std::string ckpt;
  std::string in;
  std::string out;
  std::optional<Index> resolution;
};

int run_complete(const CompleteArgs& a) {
  const LoadedModel model = stage("load-checkpoint", [&] { return load_model(a.ckpt); });
  const Points partial = stage("read-input", [&] { return read_ply(a.in); });
  const Completion c = stage("complete", [&] {
    return vrcnet_complete(model.params, model.config, partial, a.resolution);
  });
  stage("write-output", [&] {
    const fs::path prefix(a.out);
    if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
    write_ply(c.coarse, prefix.string() + "_coarse.ply");
    write_ply(c.fine, prefix.string() + "_fine.ply");
    echo_beside(loaded_config(&model.config, nullptr), a.out);
  });
  std::cout << "coarse: " << c.coarse.rows() << " fine: " << c.fine.rows() << "\n";
  return 0;
}

// --- gradcheck ---

int run_gradcheck(const std::string& module, std::optional<std::uint64_t> seed) {
  const auto entries = stage("gradcheck", [&] {
    return run_gradcheck_suite(module, seed.value_or(default_seed()));
  });
  constexpr double kTol = 1e-4;
  double worst = 0.0;
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    std::cout << (e.error < kTol ? "ok   " : "FAIL ") << e.module << "/" << e.name << " " << e.error << "\n";
    worst = std::max(worst, e.error);
  }
  std::cout << "checks: " << entries.size() << " max_rel_error: " << worst << "\n";
  return worst < kTol ? 0 : 1;
}

// --- classify-bench ---

struct BenchArgs {
  std::string cls_ckpt;
  std::string cp_ckpt;
  std::string data;
  std::optional<Index> resolution;
  std::string split = "auto";
  std::string out;
};

int run_bench(const BenchArgs& a) {
  const LoadedClassifier cls = stage("load-classifier", [&] { return load_classifier(a.cls_ckpt); });
  const LoadedDataset data = load_data(a.data);
  const Index res = a.resolution.value_or(data.manifest.partial_resolution);

  Completer completer;
  std::optional<LoadedModel> model;
  if (a.cp_ckpt == "oracle") {
    completer = [](const DatasetPair& p, Index r) {
      auto it = p.complete.find(r);
      if (it == p.complete.end()) throw std::runtime_error("no ground truth at " + std::to_string(r));
      return *it->second;
    };
  } else {
    model = stage("load-checkpoint", [&] { return load_model(a.cp_ckpt); });
    completer = vrcnet_completer(model->params, model->config);
  }
  const auto pairs = eval_pairs(data.pairs, a.split);
  if (pairs.empty()) throw StageError("classify-bench", "no pairs in split " + a.split);
  const Predictor predictor = [&](const Points& cloud) {
    return predict(cls.params, cls.config, cloud);
  };
  const BenchReport report = stage("classify-bench", [&] {
    return classification_bench(predictor, completer, pairs, cls.config.categories, res);
  });
  stage("write-report", [&] {
    write_json(to_json(report), a.out);
    echo_beside(loaded_config(model ? &model->config : nullptr, &data.manifest), a.out);
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational relational point completion toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth-data", "generate a synthetic MVP-style dataset");
  synth.flags.attach(s);
  s->add_option("--mode", synth.mode, "mvp or mvp40")->check(CLI::IsMember({"mvp", "mvp40"}));
  s->add_option("--out", synth.out, "output directory")->required();
  s->add_option("--divisor", synth.divisor, "desk-scale resolution divisor");
  s->add_option("--jobs", synth.jobs, "worker threads");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train a completion model or the classifier");
  train.flags.attach(t);
  t->add_option("--data", train.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  t->add_option("--out", train.out, "output directory")->required();
  t->add_option("--task", train.task, "completion or classifier")
      ->check(CLI::IsMember({"completion", "classifier"}));

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "CD and F-score of a checkpoint on a dataset");
  e->add_option("--ckpt", ev.ckpt, "model checkpoint")->required();
  e->add_option("--data", ev.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  e->add_option("--resolutions", ev.resolutions, "output resolutions")->delimiter(',');
  e->add_option("--split", ev.split, "train, test, all or auto")
      ->check(CLI::IsMember({"train", "test", "all", "auto"}));
  e->add_option("--tau", ev.tau, "F-score threshold")->check(CLI::PositiveNumber);
  e->add_option("--out", ev.out, "write the report here as well");

  CompleteArgs cp;
  auto* c = app.add_subcommand("complete", "complete one partial cloud");
  c->add_option("--ckpt", cp.ckpt, "model checkpoint")->required();
  c->add_option("--in", cp.in, "partial cloud (PLY)")->required()->check(CLI::ExistingFile);
  c->add_option("--out", cp.out, "output prefix")->required();
  c->add_option("--resolution", cp.resolution, "fine output size");

  std::string gc_module;
  std::optional<std::uint64_t> gc_seed;
  auto* g = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  std::vector<std::string> modules = gradcheck_modules();
  g->add_option("--module", gc_module, "restrict to one module")->check(CLI::IsMember(modules));
  g->add_option("--seed", gc_seed, "seed for inputs and parameters");

  BenchArgs bench;
  auto* b = app.add_subcommand("classify-bench", "classification accuracy on partial, completed and complete clouds");
  b->add_option("--cls-ckpt", bench.cls_ckpt, "classifier checkpoint")->required();
  b->add_option("--cp-ckpt", bench.cp_ckpt, "completion checkpoint or 'oracle'")->required();
  b->add_option("--data", bench.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  b->add_option("--resolution", bench.resolution, "completion resolution");
  b->add_option("--split", bench.split, "train, test, all or auto")
      ->check(CLI::IsMember({"train", "test", "all", "auto"}));
  b->add_option("--out", bench.out, "write the report here as well");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*s) return run_synth(synth);
    if (*t) return run_train(train);
    if (*e) return run_eval(ev);
    if (*c) return run_complete(cp);
    if (*g) return run_gradcheck(gc_module, gc_seed);
    if (*b) return run_bench(bench);
  } catch (const UsageError& err) {
    std::cerr << "vrckit: " << err.what() << "\n";
    return 2;
  } catch (const StageError& err) {
    std::cerr << "vrckit " << err.stage << ": " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "vrckit: " << err.what() << "\n";
    return 1;
  }
  return 2;
}
