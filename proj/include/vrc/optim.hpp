#pragma once

#include "vrc/random.hpp"
#include "vrc/tensor.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace vrc {

struct Param {
  Tensor value;
  Eigen::VectorXd m;  // first moment
  Eigen::VectorXd v;  // second moment
  long step = 0;
};

using GradientMap = std::map<std::string, Eigen::VectorXd>;

/// Learnable weights keyed by dotted path ("pmnet.encoder.mlp1.weight").
class ParamRegistry {
 public:
  /// Registers a zero tensor. Throws if the path exists.
  Tensor& add(const std::string& path, Shape shape);
  /// Affine weight [fan_in, fan_out] drawn from U(-sqrt(1/fan_in), sqrt(1/fan_in)).
  Tensor& add_uniform(const std::string& path, Shape shape, Index fan_in, Rng& rng);

  bool contains(const std::string& path) const { return params_.count(path) > 0; }
  const Tensor& get(const std::string& path) const;
  Tensor& get(const std::string& path);
  Param& state(const std::string& path);
  const std::map<std::string, Param>& entries() const { return params_; }
  std::size_t size() const { return params_.size(); }
  Index parameter_count() const;

  /// Per-path gradients; parameters the loss does not reach get zeros.
  GradientMap gradients(const Gradients& grads) const;

 private:
  std::map<std::string, Param> params_;
};

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update in place. Paths missing from `grads` are left
/// untouched, including their step counters.
void adam_step(ParamRegistry& registry, const GradientMap& grads, const AdamOptions& opt);

/// base_lr * decay^floor(step / interval).
double lr_schedule(long step, double base_lr, double decay, long interval);

/// Writes "<prefix>.idx.json" and "<prefix>.bin".
void save_checkpoint(const ParamRegistry& registry, const std::filesystem::path& prefix);
/// Loads values into an already-constructed registry. Every registered path
/// must be present with a matching shape. Accepts the prefix or either file.
void load_checkpoint(ParamRegistry& registry, const std::filesystem::path& checkpoint);
/// Strips ".idx.json" / ".bin" so either file or the bare prefix can be given.
std::filesystem::path checkpoint_prefix(const std::filesystem::path& any);

}  // namespace vrc
