#pragma once

#include "vrc/renet.hpp"
#include "vrc/view_synthesis.hpp"

#include <functional>
#include <iosfwd>

namespace vrc {

struct LossWeights {
  double lambda_rec = 1.0;
  double lambda_com = 1.0;
  double lambda_fine = 1.0;
  double kl_lambda = 0.1;

  void validate() const;
};

struct LossParts {
  Tensor kl_rec;
  Tensor cd_rec;
  Tensor kl_com;
  Tensor cd_com;
  Tensor cd_fine;
};

/// lambda_rec (kl_lambda kl_rec + cd_rec) + lambda_com (kl_lambda kl_com + cd_com)
/// + lambda_fine cd_fine
Tensor joint_loss(const LossParts& parts, const LossWeights& w);

struct TrainConfig {
  Index batch_size = 8;
  long epochs = 100;
  long max_steps = 0;  // 0: no cap
  double base_lr = 1e-4;
  double decay = 0.7;
  long decay_interval = 40;  // epochs
  std::uint64_t seed = 0;
  long checkpoint_every = 0;  // epochs; 0: only the final checkpoint
  std::filesystem::path out_dir;  // empty: no checkpoints

  void validate() const;
};

struct StepRecord {
  long step = 0;
  long epoch = 0;
  double lr = 0.0;
  double kl_rec = 0.0;
  double cd_rec = 0.0;
  double kl_com = 0.0;
  double cd_com = 0.0;
  double cd_fine = 0.0;
  double total = 0.0;
};

nlohmann::ordered_json to_json(const StepRecord& r);

/// Adam over shuffled mini-batches of pairs with equal partial size. Each step
/// averages the joint loss over its batch; the learning rate follows
/// lr_schedule per epoch. Writes one JSON line per step to `log` when given.
/// Throws on a non-finite loss, naming the step.
std::vector<StepRecord> fit(ParamRegistry& reg, const VRCNetConfig& model,
                            const std::vector<DatasetPair>& pairs, const TrainConfig& cfg,
                            const LossWeights& w, std::ostream* log = nullptr);

/// Completed cloud for one pair at the requested resolution.
using Completer = std::function<Points(const DatasetPair&, Index resolution)>;

/// Per-resolution reports; category averages are unweighted means over pairs,
/// overall figures are unweighted means over categories.
std::map<Index, MetricReport> evaluate(const Completer& complete,
                                       const std::vector<DatasetPair>& pairs,
                                       const std::vector<Index>& resolutions, double tau = 0.01);

/// VRCNet completer; rejects resolutions the model cannot emit.
Completer vrcnet_completer(const ParamRegistry& reg, const VRCNetConfig& cfg);

nlohmann::ordered_json to_json(const std::map<Index, MetricReport>& reports);

}  // namespace vrc
