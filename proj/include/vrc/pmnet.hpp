#pragma once

#include "vrc/geometry.hpp"
#include "vrc/metrics.hpp"
#include "vrc/nn.hpp"

#include <json.hpp>

namespace vrc {

enum class LatentPath { reconstruction, completion };

struct PMNetConfig {
  Index latent = 32;
  Index feature = 256;
  Index coarse_n = 256;
  /// Per-point widths of the first shared MLP; the second stage sees twice
  /// the last width (point feature + pooled feature).
  std::vector<Index> stage1{32, 32};
  std::vector<Index> stage2{64};
  Index decoder_hidden = 256;
  double logvar_clamp = 10.0;

  void validate() const;
};

nlohmann::ordered_json to_json(const PMNetConfig& cfg);
/// Rejects unknown keys; missing keys keep their defaults.
PMNetConfig pmnet_config_from_json(const nlohmann::json& j);

/// Registers "<prefix>.trunk.*", "<prefix>.head_rec.*", "<prefix>.head_com.*",
/// "<prefix>.decoder.*".
void add_pmnet(ParamRegistry& reg, const std::string& prefix, const PMNetConfig& cfg, Rng& rng);

struct Encoding {
  Tensor feature;  // [1, feature]
  Tensor mu;       // [1, latent]
  Tensor logvar;   // [1, latent], clamped

  LatentDistribution distribution() const;
};

/// Shared two-stage max-pooled trunk followed by the path's inference head.
/// `cloud` is [N, 3].
Encoding encode(const ParamRegistry& reg, const std::string& prefix, const PMNetConfig& cfg,
                const Tensor& cloud, LatentPath path);

/// z = mu + exp(logvar / 2) * eps with eps ~ N(0, I) drawn from `seed`.
Tensor reparameterize(const Tensor& mu, const Tensor& logvar, std::uint64_t seed);

/// [coarse_n, 3] points from concat(z, feature).
Tensor decode_coarse(const ParamRegistry& reg, const std::string& prefix, const PMNetConfig& cfg,
                     const Tensor& z, const Tensor& feature);

struct PMNetLosses {
  Tensor kl_rec;
  Tensor cd_rec;
  Tensor kl_com;
  Tensor cd_com;
  Tensor coarse;          // Yc, completion path
  Tensor reconstruction;  // Yr
};

/// Both training paths. The KL link from the completion posterior to the
/// reconstruction posterior does not propagate into the reconstruction side.
PMNetLosses pmnet_losses(const ParamRegistry& reg, const std::string& prefix,
                         const PMNetConfig& cfg, const Tensor& partial, const Tensor& complete,
                         std::uint64_t seed);

/// Completion path only, with z at the posterior mean.
Tensor pmnet_infer(const ParamRegistry& reg, const std::string& prefix, const PMNetConfig& cfg,
                   const Tensor& partial);

}  // namespace vrc
