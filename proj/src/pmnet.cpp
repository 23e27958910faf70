#include "vrc/pmnet.hpp"

#include <random>

namespace vrc {

namespace {

std::vector<Index> with_input(Index first, const std::vector<Index>& rest) {
  std::vector<Index> w{first};
  w.insert(w.end(), rest.begin(), rest.end());
  return w;
}

void require_cloud(const char* op, const Tensor& cloud) {
  if (cloud.rank() != 2 || cloud.dim(1) != 3) {
    throw ShapeError(std::string(op) + ": expected [N, 3] cloud, got " + to_string(cloud.shape()));
  }
  if (cloud.dim(0) == 0) throw std::invalid_argument(std::string(op) + ": empty point cloud");
}

const char* head_name(LatentPath path) {
  return path == LatentPath::reconstruction ? ".head_rec" : ".head_com";
}

}  // namespace

void PMNetConfig::validate() const {
  if (latent < 1 || feature < 1 || coarse_n < 1 || decoder_hidden < 1) {
    throw std::invalid_argument("PMNetConfig: sizes must be positive");
  }
  if (stage1.empty()) throw std::invalid_argument("PMNetConfig: stage1 needs at least one width");
  for (Index w : stage1) {
    if (w < 1) throw std::invalid_argument("PMNetConfig: stage1 widths must be positive");
  }
  for (Index w : stage2) {
    if (w < 1) throw std::invalid_argument("PMNetConfig: stage2 widths must be positive");
  }
  if (!(logvar_clamp > 0.0)) throw std::invalid_argument("PMNetConfig: logvar_clamp must be positive");
}

nlohmann::ordered_json to_json(const PMNetConfig& cfg) {
  return {{"latent", cfg.latent},
          {"feature", cfg.feature},
          {"coarse_n", cfg.coarse_n},
          {"stage1", cfg.stage1},
          {"stage2", cfg.stage2},
          {"decoder_hidden", cfg.decoder_hidden},
          {"logvar_clamp", cfg.logvar_clamp}};
}

PMNetConfig pmnet_config_from_json(const nlohmann::json& j) {
  PMNetConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "latent") cfg.latent = value.get<Index>();
    else if (key == "feature") cfg.feature = value.get<Index>();
    else if (key == "coarse_n") cfg.coarse_n = value.get<Index>();
    else if (key == "stage1") cfg.stage1 = value.get<std::vector<Index>>();
    else if (key == "stage2") cfg.stage2 = value.get<std::vector<Index>>();
    else if (key == "decoder_hidden") cfg.decoder_hidden = value.get<Index>();
    else if (key == "logvar_clamp") cfg.logvar_clamp = value.get<double>();
    else throw std::invalid_argument("pmnet config: unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

void add_pmnet(ParamRegistry& reg, const std::string& prefix, const PMNetConfig& cfg, Rng& rng) {
  cfg.validate();
  add_mlp(reg, prefix + ".trunk.stage1", with_input(3, cfg.stage1), rng);
  std::vector<Index> s2 = with_input(2 * cfg.stage1.back(), cfg.stage2);
  s2.push_back(cfg.feature);
  add_mlp(reg, prefix + ".trunk.stage2", s2, rng);
  for (LatentPath path : {LatentPath::reconstruction, LatentPath::completion}) {
    add_affine(reg, prefix + head_name(path) + ".mu", cfg.feature, cfg.latent, rng);
    add_affine(reg, prefix + head_name(path) + ".logvar", cfg.feature, cfg.latent, rng);
  }
  add_mlp(reg, prefix + ".decoder",
          {cfg.latent + cfg.feature, cfg.decoder_hidden, cfg.decoder_hidden, 3 * cfg.coarse_n}, rng);
}

LatentDistribution Encoding::distribution() const {
  return {mu.values(), logvar.values()};
}

Encoding encode(const ParamRegistry& reg, const std::string& prefix, const PMNetConfig& cfg,
                const Tensor& cloud, LatentPath path) {
  require_cloud("encode", cloud);
  const Index n = cloud.dim(0);
  const Tensor local = mlp(reg, prefix + ".trunk.stage1", cfg.stage1.size(), cloud);
  const Tensor pooled = reshape(max_reduce(local, 0), {1, cfg.stage1.back()});
  const Tensor mixed = concat({local, tile(pooled, 0, n)}, 1);
  const Tensor deep = mlp(reg, prefix + ".trunk.stage2", cfg.stage2.size() + 1, mixed);

  Encoding e;
  e.feature = reshape(max_reduce(deep, 0), {1, cfg.feature});
  const std::string head = prefix + head_name(path);
  e.mu = affine(reg, head + ".mu", e.feature);
  e.logvar = clamp(affine(reg, head + ".logvar", e.feature), -cfg.logvar_clamp, cfg.logvar_clamp);
  return e;
}

Tensor reparameterize(const Tensor& mu, const Tensor& logvar, std::uint64_t seed) {
  if (mu.shape() != logvar.shape()) {
    throw ShapeError("reparameterize: mu " + to_string(mu.shape()) + " vs logvar " +
                     to_string(logvar.shape()));
  }
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd eps(mu.size());
  for (Index i = 0; i < eps.size(); ++i) eps[i] = normal(rng);
  return add(mu, mul(exp(scale(logvar, 0.5)), Tensor::from(mu.shape(), eps)));
}

Tensor decode_coarse(const ParamRegistry& reg, const std::string& prefix, const PMNetConfig& cfg,
                     const Tensor& z, const Tensor& feature) {
  if (z.size() != cfg.latent || feature.size() != cfg.feature) {
    throw ShapeError("decode_coarse: expected latent " + std::to_string(cfg.latent) +
                     " and feature " + std::to_string(cfg.feature) + ", got " +
                     to_string(z.shape()) + " and " + to_string(feature.shape()));
  }
  const Tensor in = concat({reshape(z, {1, cfg.latent}), reshape(feature, {1, cfg.feature})}, 1);
  return reshape(mlp(reg, prefix + ".decoder", 3, in, false), {cfg.coarse_n, 3});
}

PMNetLosses pmnet_losses(const ParamRegistry& reg, const std::string& prefix,
                         const PMNetConfig& cfg, const Tensor& partial, const Tensor& complete,
                         std::uint64_t seed) {
  PMNetLosses out;
  const Encoding q = encode(reg, prefix, cfg, complete, LatentPath::reconstruction);
  const Tensor zero = Tensor::zeros(q.mu.shape());
  out.kl_rec = gaussian_kl(q.mu, q.logvar, zero, zero);
  out.reconstruction =
      decode_coarse(reg, prefix, cfg, reparameterize(q.mu, q.logvar, derive_seed(seed, "rec")),
                    q.feature);
  out.cd_rec = chamfer_distance(out.reconstruction, complete);

  const Encoding p = encode(reg, prefix, cfg, partial, LatentPath::completion);
  out.kl_com = gaussian_kl(q.mu.detach(), q.logvar.detach(), p.mu, p.logvar);
  out.coarse =
      decode_coarse(reg, prefix, cfg, reparameterize(p.mu, p.logvar, derive_seed(seed, "com")),
                    p.feature);
  out.cd_com = chamfer_distance(out.coarse, complete);
  return out;
}

Tensor pmnet_infer(const ParamRegistry& reg, const std::string& prefix, const PMNetConfig& cfg,
                   const Tensor& partial) {
  const Encoding p = encode(reg, prefix, cfg, partial, LatentPath::completion);
  return decode_coarse(reg, prefix, cfg, p.mu, p.feature);
}

}  // namespace vrc
