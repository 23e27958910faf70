#include "vrc/training.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <cmath>
#include <ostream>

namespace vrc {

void LossWeights::validate() const {
  for (double v : {lambda_rec, lambda_com, lambda_fine, kl_lambda}) {
    if (!(v >= 0.0)) throw std::invalid_argument("LossWeights: weights must be >= 0");
  }
}

Tensor joint_loss(const LossParts& p, const LossWeights& w) {
  w.validate();
  for (const Tensor* t : {&p.kl_rec, &p.cd_rec, &p.kl_com, &p.cd_com, &p.cd_fine}) {
    if (!t->defined() || t->size() != 1) throw ShapeError("joint_loss: every part must be a scalar");
  }
  const Tensor rec = scale(add(scale(p.kl_rec, w.kl_lambda), p.cd_rec), w.lambda_rec);
  const Tensor com = scale(add(scale(p.kl_com, w.kl_lambda), p.cd_com), w.lambda_com);
  return add(add(rec, com), scale(p.cd_fine, w.lambda_fine));
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (max_steps < 0) throw std::invalid_argument("TrainConfig: max_steps must be >= 0");
  if (!(base_lr > 0.0)) throw std::invalid_argument("TrainConfig: base_lr must be positive");
  if (!(decay > 0.0)) throw std::invalid_argument("TrainConfig: decay must be positive");
  if (decay_interval < 1) throw std::invalid_argument("TrainConfig: decay_interval must be >= 1");
  if (checkpoint_every < 0) throw std::invalid_argument("TrainConfig: checkpoint_every must be >= 0");
}

nlohmann::ordered_json to_json(const StepRecord& r) {
  return {{"step", r.step},     {"epoch", r.epoch},   {"lr", r.lr},
          {"kl_rec", r.kl_rec}, {"cd_rec", r.cd_rec}, {"kl_com", r.kl_com},
          {"cd_com", r.cd_com}, {"cd_fine", r.cd_fine}, {"total", r.total}};
}

namespace {

const Points& ground_truth(const DatasetPair& pair, Index resolution) {
  auto it = pair.complete.find(resolution);
  if (it == pair.complete.end() || !it->second) {
    throw std::invalid_argument("pair " + pair.pair_id + " has no ground truth at " +
                                std::to_string(resolution) + " points");
  }
  return *it->second;
}

// Shuffled order, then batches that never mix partial sizes.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<DatasetPair>& pairs,
                                                   Index batch_size, Rng& rng) {
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pairs[a].partial.rows() < pairs[b].partial.rows();
  });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const bool fresh = batches.empty() ||
                       static_cast<Index>(batches.back().size()) >= batch_size ||
                       pairs[batches.back().front()].partial.rows() != pairs[order[i]].partial.rows();
    if (fresh) batches.emplace_back();
    batches.back().push_back(order[i]);
  }
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

}  // namespace

std::vector<StepRecord> fit(ParamRegistry& reg, const VRCNetConfig& model,
                            const std::vector<DatasetPair>& pairs, const TrainConfig& cfg,
                            const LossWeights& w, std::ostream* log) {
  cfg.validate();
  w.validate();
  model.validate();
  if (pairs.empty()) throw std::invalid_argument("fit: empty dataset");
  const Index gt_n = model.renet.output_n;
  for (const auto& p : pairs) ground_truth(p, gt_n);

  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  const std::uint64_t sample_seed = derive_seed(cfg.seed, "training");
  std::vector<StepRecord> trace;
  long step = 0;
  bool done = false;
  for (long epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
    AdamOptions opt;
    opt.lr = lr_schedule(epoch, cfg.base_lr, cfg.decay, cfg.decay_interval);
    for (const auto& batch : make_batches(pairs, cfg.batch_size, shuffle_rng)) {
      const double inv = 1.0 / static_cast<double>(batch.size());
      StepRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      rec.lr = opt.lr;
      Tensor total;
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const DatasetPair& pair = pairs[batch[b]];
        const VRCNetLosses l = vrcnet_losses(reg, model, pair.partial, ground_truth(pair, gt_n),
                                             derive_seed(sample_seed, static_cast<std::uint64_t>(step), b));
        const Tensor loss = joint_loss({l.kl_rec, l.cd_rec, l.kl_com, l.cd_com, l.cd_fine}, w);
        total = total.defined() ? add(total, loss) : loss;
        rec.kl_rec += l.kl_rec.item() * inv;
        rec.cd_rec += l.cd_rec.item() * inv;
        rec.kl_com += l.kl_com.item() * inv;
        rec.cd_com += l.cd_com.item() * inv;
        rec.cd_fine += l.cd_fine.item() * inv;
      }
      total = scale(total, inv);
      rec.total = total.item();
      if (!std::isfinite(rec.total)) {
        throw std::runtime_error("fit: non-finite loss at step " + std::to_string(step));
      }
      adam_step(reg, reg.gradients(backward(total)), opt);
      if (log) *log << to_json(rec).dump() << "\n";
      trace.push_back(rec);
      ++step;
      if (cfg.max_steps > 0 && step >= cfg.max_steps) {
        done = true;
        break;
      }
    }
    if (!cfg.out_dir.empty() && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04ld", epoch + 1);
      save_model(reg, model, cfg.out_dir / name);
    }
  }
  if (log) log->flush();
  if (!cfg.out_dir.empty()) save_model(reg, model, cfg.out_dir / "final");
  return trace;
}

std::map<Index, MetricReport> evaluate(const Completer& complete,
                                       const std::vector<DatasetPair>& pairs,
                                       const std::vector<Index>& resolutions, double tau) {
  if (pairs.empty()) throw std::invalid_argument("evaluate: no pairs");
  if (resolutions.empty()) throw std::invalid_argument("evaluate: no resolutions");
  std::map<Index, MetricReport> out;
  for (Index res : resolutions) {
    struct Acc {
      double cd = 0, f1 = 0, precision = 0, recall = 0;
      long count = 0;
    };
    std::map<std::string, Acc> acc;
    for (const auto& pair : pairs) {
      const Points& gt = ground_truth(pair, res);
      const Points pred = complete(pair, res);
      const FScore f = fscore(pred, gt, tau);
      Acc& a = acc[pair.category];
      a.cd += chamfer_distance(pred, gt);
      a.f1 += f.f1;
      a.precision += f.precision;
      a.recall += f.recall;
      ++a.count;
    }
    MetricReport& r = out[res];
    for (const auto& [cat, a] : acc) {
      const double n = static_cast<double>(a.count);
      r.per_category[cat] = {a.cd / n, a.f1 / n, a.count};
      r.cd += a.cd / n;
      r.fscore += a.f1 / n;
      r.precision += a.precision / n;
      r.recall += a.recall / n;
    }
    const double k = static_cast<double>(acc.size());
    r.cd /= k;
    r.fscore /= k;
    r.precision /= k;
    r.recall /= k;
  }
  return out;
}

Completer vrcnet_completer(const ParamRegistry& reg, const VRCNetConfig& cfg) {
  return [&reg, cfg](const DatasetPair& pair, Index res) {
    const Index limit = cfg.max_output(pair.partial.rows());
    if (res > limit) {
      throw std::invalid_argument("evaluate: resolution " + std::to_string(res) +
                                  " unsupported by checkpoint (max " + std::to_string(limit) +
                                  " for " + std::to_string(pair.partial.rows()) + "-point partials)");
    }
    return vrcnet_complete(reg, cfg, pair.partial, res).fine;
  };
}

nlohmann::ordered_json to_json(const std::map<Index, MetricReport>& reports) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [res, r] : reports) j[std::to_string(res)] = to_json(r);
  return j;
}

}  // namespace vrc
