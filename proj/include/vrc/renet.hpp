#pragma once

#include "vrc/kernels.hpp"
#include "vrc/pmnet.hpp"

#include <optional>

namespace vrc {

struct RENetConfig {
  int levels = 2;
  /// One width per level plus the bottleneck.
  std::vector<Index> channels{16, 32, 32};
  std::vector<double> pool_ratios{0.25, 0.25};
  /// Neighbourhood of the pooling max, per level.
  std::vector<Index> pool_k{8, 8};
  std::array<Index, 2> branch_ks{8, 16};
  Index c_mid = 8;
  Index code_width = 8;
  Index up_ratio = 2;
  Index output_n = 1024;

  void validate() const;
  PSKConfig block(Index c_in, Index c_out) const { return {branch_ks, c_in, c_out, c_mid}; }
};

nlohmann::ordered_json to_json(const RENetConfig& cfg);
RENetConfig renet_config_from_json(const nlohmann::json& j);

void add_renet(ParamRegistry& reg, const std::string& prefix, const RENetConfig& cfg, Rng& rng);

struct RENetOutput {
  Tensor fine;      // [output_n, 3]
  Tensor expanded;  // [up_ratio (|X| + |Yc|), 3] before the final FPS
};

/// Refines concat(partial, coarse). `output_n` overrides cfg.output_n and may
/// not exceed the expanded point count.
RENetOutput renet_forward(const ParamRegistry& reg, const std::string& prefix,
                          const RENetConfig& cfg, const Tensor& partial, const Tensor& coarse,
                          std::optional<Index> output_n = std::nullopt);

struct VRCNetConfig {
  PMNetConfig pmnet;
  RENetConfig renet;

  void validate() const;
  /// Largest output the model can emit for a partial of `partial_n` points.
  Index max_output(Index partial_n) const {
    return renet.up_ratio * (partial_n + pmnet.coarse_n);
  }
};

nlohmann::ordered_json to_json(const VRCNetConfig& cfg);
VRCNetConfig vrcnet_config_from_json(const nlohmann::json& j);

/// Registers "pmnet.*" and "renet.*".
void add_vrcnet(ParamRegistry& reg, const VRCNetConfig& cfg, Rng& rng);

struct VRCNetLosses {
  Tensor kl_rec;
  Tensor cd_rec;
  Tensor kl_com;
  Tensor cd_com;
  Tensor cd_fine;
  Tensor coarse;
  Tensor fine;
};

/// `complete` is the ground truth at cfg.renet.output_n points.
VRCNetLosses vrcnet_losses(const ParamRegistry& reg, const VRCNetConfig& cfg,
                           const Points& partial, const Points& complete, std::uint64_t seed);

struct Completion {
  Points coarse;
  Points fine;
};

/// Deterministic inference (latent at the posterior mean), no tape.
Completion vrcnet_complete(const ParamRegistry& reg, const VRCNetConfig& cfg,
                           const Points& partial, std::optional<Index> output_n = std::nullopt);

/// Model config sidecar "<prefix>.model.json" next to the checkpoint.
void save_model(const ParamRegistry& reg, const VRCNetConfig& cfg,
                const std::filesystem::path& prefix);
struct LoadedModel {
  VRCNetConfig config;
  ParamRegistry params;
};
LoadedModel load_model(const std::filesystem::path& checkpoint);

}  // namespace vrc
