#include "vrc/renet.hpp"

#include <fstream>

namespace vrc {

namespace {

void require_cloud(const char* op, const Tensor& t) {
  if (t.rank() != 2 || t.dim(1) != 3 || t.dim(0) == 0) {
    throw ShapeError(std::string(op) + ": expected nonempty [N, 3] cloud, got " +
                     to_string(t.shape()));
  }
}

std::string level(const std::string& prefix, const char* part, int l) {
  return prefix + "." + part + std::to_string(l);
}

}  // namespace

void RENetConfig::validate() const {
  if (levels < 1) throw std::invalid_argument("RENetConfig: levels must be >= 1");
  const auto l = static_cast<std::size_t>(levels);
  if (channels.size() != l + 1) {
    throw std::invalid_argument("RENetConfig: channels needs levels + 1 entries");
  }
  if (pool_ratios.size() != l || pool_k.size() != l) {
    throw std::invalid_argument("RENetConfig: pool_ratios and pool_k need one entry per level");
  }
  for (double r : pool_ratios) {
    if (!(r > 0.0 && r <= 1.0)) throw std::invalid_argument("RENetConfig: pool ratios must be in (0, 1]");
  }
  for (Index k : pool_k) {
    if (k < 1) throw std::invalid_argument("RENetConfig: pool_k must be >= 1");
  }
  for (Index c : channels) {
    if (c < 1) throw std::invalid_argument("RENetConfig: channels must be >= 1");
  }
  if (up_ratio < 1) throw std::invalid_argument("RENetConfig: up_ratio must be >= 1");
  if (output_n < 1) throw std::invalid_argument("RENetConfig: output_n must be >= 1");
  if (code_width < 1) throw std::invalid_argument("RENetConfig: code_width must be >= 1");
  block(channels[0], channels[0]).validate();
}

nlohmann::ordered_json to_json(const RENetConfig& cfg) {
  return {{"levels", cfg.levels},          {"channels", cfg.channels},
          {"pool_ratios", cfg.pool_ratios}, {"pool_k", cfg.pool_k},
          {"branch_ks", cfg.branch_ks},     {"c_mid", cfg.c_mid},
          {"code_width", cfg.code_width},   {"up_ratio", cfg.up_ratio},
          {"output_n", cfg.output_n}};
}

RENetConfig renet_config_from_json(const nlohmann::json& j) {
  RENetConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "levels") cfg.levels = value.get<int>();
    else if (key == "channels") cfg.channels = value.get<std::vector<Index>>();
    else if (key == "pool_ratios") cfg.pool_ratios = value.get<std::vector<double>>();
    else if (key == "pool_k") cfg.pool_k = value.get<std::vector<Index>>();
    else if (key == "branch_ks") cfg.branch_ks = value.get<std::array<Index, 2>>();
    else if (key == "c_mid") cfg.c_mid = value.get<Index>();
    else if (key == "code_width") cfg.code_width = value.get<Index>();
    else if (key == "up_ratio") cfg.up_ratio = value.get<Index>();
    else if (key == "output_n") cfg.output_n = value.get<Index>();
    else throw std::invalid_argument("renet config: unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

void add_renet(ParamRegistry& reg, const std::string& prefix, const RENetConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto& c = cfg.channels;
  const int levels = cfg.levels;
  add_affine(reg, prefix + ".input", 4, c[0], rng);
  for (int l = 0; l < levels; ++l) {
    add_rpsk(reg, level(prefix, "enc", l), cfg.block(l == 0 ? c[0] : c[l - 1], c[l]), rng);
  }
  add_rpsk(reg, prefix + ".bottleneck", cfg.block(c[levels - 1], c[levels]), rng);
  for (int l = levels - 1; l >= 0; --l) {
    add_rpsk(reg, level(prefix, "dec", l), cfg.block(c[l + 1] + c[l], c[l]), rng);
  }
  add_efe(reg, prefix + ".efe", {c[0], cfg.code_width, c[0], cfg.up_ratio}, rng);
}

RENetOutput renet_forward(const ParamRegistry& reg, const std::string& prefix,
                          const RENetConfig& cfg, const Tensor& partial, const Tensor& coarse,
                          std::optional<Index> output_n) {
  cfg.validate();
  require_cloud("renet_forward", partial);
  require_cloud("renet_forward", coarse);
  const auto& c = cfg.channels;
  const int levels = cfg.levels;
  const Index n0 = partial.dim(0) + coarse.dim(0);
  const Index want = output_n.value_or(cfg.output_n);
  if (want < 1 || want > cfg.up_ratio * n0) {
    throw std::invalid_argument("renet_forward: output_n " + std::to_string(want) +
                                " outside [1, " + std::to_string(cfg.up_ratio * n0) + "]");
  }

  const Tensor cloud = concat({partial, coarse}, 0);
  Eigen::VectorXd flag = Eigen::VectorXd::Zero(n0);
  flag.tail(coarse.dim(0)).setOnes();
  Tensor f = affine_relu(reg, prefix + ".input", concat({cloud, Tensor::from({n0, 1}, flag)}, 1));

  std::vector<Points> coords{as_points(cloud)};
  std::vector<Tensor> xyz{cloud};
  std::vector<NeighborTable> nbrs;
  std::vector<Tensor> skips;
  for (int l = 0; l < levels; ++l) {
    nbrs.push_back(knn(coords[l], coords[l], cfg.block(1, 1).max_k()));
    f = rpsk_forward(reg, level(prefix, "enc", l), cfg.block(l == 0 ? c[0] : c[l - 1], c[l]), f,
                     nbrs[l]);
    skips.push_back(f);
    PoolResult pooled = ep_pool(f, coords[l], cfg.pool_ratios[l], cfg.pool_k[l]);
    f = pooled.features;
    xyz.push_back(gather(xyz[l], pooled.kept));
    coords.push_back(std::move(pooled.coords));
  }
  f = rpsk_forward(reg, prefix + ".bottleneck", cfg.block(c[levels - 1], c[levels]), f,
                   coords[levels]);
  for (int l = levels - 1; l >= 0; --l) {
    const Tensor up = eu_unpool(f, xyz[l + 1], xyz[l], skips[l]);
    f = rpsk_forward(reg, level(prefix, "dec", l), cfg.block(c[l + 1] + c[l], c[l]), up, nbrs[l]);
  }

  const EFEResult efe =
      efe_expand(reg, prefix + ".efe", {c[0], cfg.code_width, c[0], cfg.up_ratio}, f, cloud);
  RENetOutput out;
  out.expanded = efe.coords;
  const Points expanded = as_points(efe.coords);
  out.fine = gather(efe.coords, farthest_point_sample(expanded, want, extreme_point_index(expanded)));
  return out;
}

void VRCNetConfig::validate() const {
  pmnet.validate();
  renet.validate();
}

nlohmann::ordered_json to_json(const VRCNetConfig& cfg) {
  return {{"pmnet", to_json(cfg.pmnet)}, {"renet", to_json(cfg.renet)}};
}

VRCNetConfig vrcnet_config_from_json(const nlohmann::json& j) {
  VRCNetConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "pmnet") cfg.pmnet = pmnet_config_from_json(value);
    else if (key == "renet") cfg.renet = renet_config_from_json(value);
    else throw std::invalid_argument("model config: unknown key '" + key + "'");
  }
  return cfg;
}

void add_vrcnet(ParamRegistry& reg, const VRCNetConfig& cfg, Rng& rng) {
  cfg.validate();
  add_pmnet(reg, "pmnet", cfg.pmnet, rng);
  add_renet(reg, "renet", cfg.renet, rng);
}

VRCNetLosses vrcnet_losses(const ParamRegistry& reg, const VRCNetConfig& cfg,
                           const Points& partial, const Points& complete, std::uint64_t seed) {
  const Tensor x = as_tensor(partial);
  const Tensor y = as_tensor(complete);
  PMNetLosses pm = pmnet_losses(reg, "pmnet", cfg.pmnet, x, y, seed);
  const RENetOutput re = renet_forward(reg, "renet", cfg.renet, x, pm.coarse);
  return {pm.kl_rec, pm.cd_rec, pm.kl_com, pm.cd_com, chamfer_distance(re.fine, y),
          pm.coarse, re.fine};
}

Completion vrcnet_complete(const ParamRegistry& reg, const VRCNetConfig& cfg,
                           const Points& partial, std::optional<Index> output_n) {
  NoGradGuard guard;
  const Tensor x = as_tensor(partial);
  const Tensor coarse = pmnet_infer(reg, "pmnet", cfg.pmnet, x);
  const RENetOutput re = renet_forward(reg, "renet", cfg.renet, x, coarse, output_n);
  return {as_points(coarse), as_points(re.fine)};
}

void save_model(const ParamRegistry& reg, const VRCNetConfig& cfg,
                const std::filesystem::path& prefix) {
  save_checkpoint(reg, prefix);
  const std::filesystem::path side = prefix.string() + ".model.json";
  std::ofstream os(side);
  if (!os) throw std::runtime_error("save_model: cannot write " + side.string());
  os << to_json(cfg).dump(2) << "\n";
}

LoadedModel load_model(const std::filesystem::path& checkpoint) {
  std::filesystem::path prefix = checkpoint_prefix(checkpoint);
  const std::string p = prefix.string();
  if (p.size() > 11 && p.ends_with(".model.json")) prefix = p.substr(0, p.size() - 11);
  const std::filesystem::path side = prefix.string() + ".model.json";
  std::ifstream is(side);
  if (!is) throw std::runtime_error("load_model: cannot read model config " + side.string());
  LoadedModel m;
  try {
    m.config = vrcnet_config_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_model: " + side.string() + ": " + e.what());
  }
  Rng rng(0);
  add_vrcnet(m.params, m.config, rng);
  load_checkpoint(m.params, prefix);
  return m;
}

}  // namespace vrc
