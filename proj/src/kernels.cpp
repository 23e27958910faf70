#include "vrc/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace vrc {

namespace {

void require_features(const char* op, const Tensor& x, Index width) {
  if (x.rank() != 2 || x.dim(1) != width) {
    throw ShapeError(std::string(op) + ": expected [N, " + std::to_string(width) +
                     "] features, got " + to_string(x.shape()));
  }
  if (x.dim(0) == 0) throw ShapeError(std::string(op) + ": no points");
}

// First k columns of `nbr`, flattened row-major.
IndexList flat_neighbors(const char* op, const NeighborTable& nbr, Index n, Index k) {
  if (nbr.rows() != n || nbr.cols() < k) {
    throw ShapeError(std::string(op) + ": neighbour table is " + std::to_string(nbr.rows()) + "x" +
                     std::to_string(nbr.cols()) + ", need " + std::to_string(n) + "x" +
                     std::to_string(k));
  }
  IndexList flat(static_cast<std::size_t>(n * k));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < k; ++j) {
      const Index v = nbr(i, j);
      if (v < 0 || v >= n) {
        throw IndexError(std::string(op) + ": neighbour index " + std::to_string(v) +
                         " out of range for " + std::to_string(n) + " points");
      }
      flat[static_cast<std::size_t>(i * k + j)] = v;
    }
  }
  return flat;
}

}  // namespace

void PSAConfig::validate() const {
  if (k < 1) throw std::invalid_argument("PSAConfig: k must be >= 1");
  if (c_in < 1 || c_mid < 1 || c_out < 1) {
    throw std::invalid_argument("PSAConfig: channel widths must be >= 1");
  }
}

void add_psa(ParamRegistry& reg, const std::string& prefix, const PSAConfig& cfg, Rng& rng) {
  cfg.validate();
  add_affine(reg, prefix + ".sigma", cfg.c_in, cfg.c_mid, rng);
  add_affine(reg, prefix + ".xi", cfg.c_in, cfg.c_mid, rng);
  add_affine(reg, prefix + ".beta", cfg.c_in, cfg.c_out, rng);
  add_affine(reg, prefix + ".gamma.0", (1 + cfg.k) * cfg.c_mid, cfg.c_out, rng);
  add_affine(reg, prefix + ".gamma.1", cfg.c_out, cfg.k * cfg.c_out, rng);
}

Tensor psa_forward(const ParamRegistry& reg, const std::string& prefix, const PSAConfig& cfg,
                   const Tensor& features, const NeighborTable& neighbors) {
  cfg.validate();
  require_features("psa_forward", features, cfg.c_in);
  const Index n = features.dim(0), k = cfg.k;
  const IndexList flat = flat_neighbors("psa_forward", neighbors, n, k);

  const Tensor sigma = affine_relu(reg, prefix + ".sigma", features);
  const Tensor xi = affine_relu(reg, prefix + ".xi", features);
  const Tensor beta = affine_relu(reg, prefix + ".beta", features);

  const Tensor delta = concat({sigma, reshape(gather(xi, flat), {n, k * cfg.c_mid})}, 1);
  const Tensor alpha =
      affine(reg, prefix + ".gamma.1", affine_relu(reg, prefix + ".gamma.0", delta));
  const Tensor weighted = mul(reshape(alpha, {n * k, cfg.c_out}), gather(beta, flat));
  return sum_reduce(reshape(weighted, {n, k, cfg.c_out}), 1);
}

void PSKConfig::validate() const {
  if (branch_ks[0] == branch_ks[1]) {
    throw std::invalid_argument("PSKConfig: branch sizes must differ");
  }
  branch(0).validate();
  branch(1).validate();
}

void add_psk(ParamRegistry& reg, const std::string& prefix, const PSKConfig& cfg, Rng& rng) {
  cfg.validate();
  add_psa(reg, prefix + ".a", cfg.branch(0), rng);
  add_psa(reg, prefix + ".b", cfg.branch(1), rng);
  const Index d = cfg.reduced_width();
  reg.add_uniform(prefix + ".W", {cfg.c, d}, cfg.c, rng);
  reg.add_uniform(prefix + ".A", {d, cfg.c}, d, rng);
  reg.add_uniform(prefix + ".B", {d, cfg.c}, d, rng);
}

PSKResult psk_forward(const ParamRegistry& reg, const std::string& prefix, const PSKConfig& cfg,
                      const Tensor& features, const NeighborTable& neighbors) {
  cfg.validate();
  require_features("psk_forward", features, cfg.c_in);
  const Index n = features.dim(0);
  const Tensor u_a = psa_forward(reg, prefix + ".a", cfg.branch(0), features, neighbors);
  const Tensor u_b = psa_forward(reg, prefix + ".b", cfg.branch(1), features, neighbors);

  const Tensor s = reshape(mean_reduce(add(u_a, u_b), 0), {1, cfg.c});
  const Tensor z = relu(linear(s, reg.get(prefix + ".W")));
  const Tensor logits = concat({linear(z, reg.get(prefix + ".A")), linear(z, reg.get(prefix + ".B"))}, 0);
  const Tensor gates = softmax(logits, 0);

  PSKResult r;
  r.gate_a = slice(gates, 0, 0, 1);
  r.gate_b = slice(gates, 0, 1, 2);
  r.out = add(mul(u_a, tile(r.gate_a, 0, n)), mul(u_b, tile(r.gate_b, 0, n)));
  return r;
}

PSKResult psk_forward(const ParamRegistry& reg, const std::string& prefix, const PSKConfig& cfg,
                      const Tensor& features, const Points& coords) {
  if (coords.rows() != features.dim(0)) {
    throw ShapeError("psk_forward: " + std::to_string(coords.rows()) + " coordinates for " +
                     std::to_string(features.dim(0)) + " feature rows");
  }
  return psk_forward(reg, prefix, cfg, features, knn(coords, coords, cfg.max_k()));
}

void add_rpsk(ParamRegistry& reg, const std::string& prefix, const PSKConfig& cfg, Rng& rng) {
  add_psk(reg, prefix + ".main", cfg, rng);
  if (cfg.c_in != cfg.c) add_affine(reg, prefix + ".proj", cfg.c_in, cfg.c, rng);
}

Tensor rpsk_forward(const ParamRegistry& reg, const std::string& prefix, const PSKConfig& cfg,
                    const Tensor& features, const NeighborTable& neighbors) {
  const Tensor main = psk_forward(reg, prefix + ".main", cfg, features, neighbors).out;
  const Tensor residual = cfg.c_in == cfg.c ? features : affine(reg, prefix + ".proj", features);
  return add(main, residual);
}

Tensor rpsk_forward(const ParamRegistry& reg, const std::string& prefix, const PSKConfig& cfg,
                    const Tensor& features, const Points& coords) {
  if (coords.rows() != features.dim(0)) {
    throw ShapeError("rpsk_forward: " + std::to_string(coords.rows()) + " coordinates for " +
                     std::to_string(features.dim(0)) + " feature rows");
  }
  return rpsk_forward(reg, prefix, cfg, features, knn(coords, coords, cfg.max_k()));
}

PoolResult ep_pool(const Tensor& features, const Points& coords, double ratio, Index k) {
  if (features.rank() != 2 || features.dim(0) != coords.rows()) {
    throw ShapeError("ep_pool: features " + to_string(features.shape()) + " do not match " +
                     std::to_string(coords.rows()) + " coordinates");
  }
  const Index n = coords.rows();
  if (n == 0) throw ShapeError("ep_pool: empty cloud");
  if (!(ratio > 0.0 && ratio <= 1.0)) throw std::invalid_argument("ep_pool: ratio must be in (0, 1]");
  if (k < 1 || k > n) {
    throw std::invalid_argument("ep_pool: k=" + std::to_string(k) + " with " + std::to_string(n) +
                                " points");
  }
  const Index m = std::max<Index>(1, static_cast<Index>(std::ceil(ratio * static_cast<double>(n))));
  PoolResult r;
  r.kept = farthest_point_sample(coords, m, extreme_point_index(coords));
  std::sort(r.kept.begin(), r.kept.end());
  r.coords = select_rows(coords, r.kept);

  const NeighborTable nbr = knn(coords, r.coords, k);
  IndexList flat(static_cast<std::size_t>(m * k));
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < k; ++j) flat[static_cast<std::size_t>(i * k + j)] = nbr(i, j);
  }
  r.features = max_reduce(reshape(gather(features, flat), {m, k, features.dim(1)}), 1);
  return r;
}

Tensor eu_unpool(const Tensor& coarse_features, const Points& coarse_coords,
                 const Points& fine_coords, const Tensor& skip) {
  return eu_unpool(coarse_features, as_tensor(coarse_coords), as_tensor(fine_coords), skip);
}

Tensor eu_unpool(const Tensor& coarse_features, const Tensor& coarse_xyz, const Tensor& fine_xyz,
                 const Tensor& skip) {
  const Points coarse = as_points(coarse_xyz);
  const Points fine = as_points(fine_xyz);
  const Index m = coarse.rows(), n = fine.rows();
  if (m == 0) throw ShapeError("eu_unpool: no coarse points");
  if (coarse_features.rank() != 2 || coarse_features.dim(0) != m) {
    throw ShapeError("eu_unpool: coarse features " + to_string(coarse_features.shape()) +
                     " do not match " + std::to_string(m) + " coarse points");
  }
  if (!skip.defined() || skip.rank() != 2 || skip.dim(0) != n) {
    throw ShapeError("eu_unpool: skip features must be [" + std::to_string(n) + ", C]");
  }
  const Index c = coarse_features.dim(1);
  const Index kk = std::min<Index>(3, m);
  const NeighborTable nbr = knn(coarse, fine, kk);

  IndexList flat(static_cast<std::size_t>(n * kk)), rows(static_cast<std::size_t>(n * kk));
  Eigen::VectorXd keep = Eigen::VectorXd::Ones(n * kk);
  Eigen::VectorXd exact = Eigen::VectorXd::Zero(n * kk);
  for (Index i = 0; i < n; ++i) {
    bool hit = false;
    for (Index j = 0; j < kk; ++j) {
      const auto at = static_cast<std::size_t>(i * kk + j);
      flat[at] = nbr(i, j);
      rows[at] = i;
      if (!hit && (fine.row(i) - coarse.row(nbr(i, j))).squaredNorm() == 0.0) {
        hit = true;
        exact[i * kk + j] = 1.0;
      }
    }
    if (hit) keep.segment(i * kk, kk).setZero();
  }

  // w_ij = 1 / (d_ij^2 + 1e-8), normalized per fine point; a coincident point
  // takes weight 1 outright.
  const Tensor diff = sub(gather(fine_xyz, rows), gather(coarse_xyz, flat));
  const Tensor w = reshape(reciprocal(add_scalar(sum_reduce(square(diff), 1), 1e-8)), {n, kk});
  const Tensor total = tile(reshape(sum_reduce(w, 1), {n, 1}), 1, kk);
  Tensor weights = mul(mul(w, reciprocal(total)), Tensor::from({n, kk}, keep));
  weights = add(weights, Tensor::from({n, kk}, exact));

  const Tensor spread = tile(reshape(weights, {n * kk, 1}), 1, c);
  const Tensor interp =
      sum_reduce(reshape(mul(gather(coarse_features, flat), spread), {n, kk, c}), 1);
  return concat({interp, skip}, 1);
}

void EFEConfig::validate() const {
  if (up_ratio < 1) throw std::invalid_argument("efe_expand: up_ratio must be >= 1");
  if (c_in < 1 || c_code < 1 || c_out < 1) {
    throw std::invalid_argument("EFEConfig: channel widths must be >= 1");
  }
}

void add_efe(ParamRegistry& reg, const std::string& prefix, const EFEConfig& cfg, Rng& rng,
             double offset_init_scale) {
  cfg.validate();
  reg.add_uniform(prefix + ".codes", {cfg.up_ratio, cfg.c_code}, 1, rng);
  add_mlp(reg, prefix + ".mlp", {cfg.c_in + cfg.c_code, cfg.c_out, cfg.c_out}, rng);
  add_affine(reg, prefix + ".offset", cfg.c_out + cfg.c_code, 3, rng, offset_init_scale);
}

EFEResult efe_expand(const ParamRegistry& reg, const std::string& prefix, const EFEConfig& cfg,
                     const Tensor& features, const Tensor& anchors) {
  cfg.validate();
  require_features("efe_expand", features, cfg.c_in);
  const Index n = features.dim(0), r = cfg.up_ratio;
  if (anchors.rank() != 2 || anchors.dim(0) != n || anchors.dim(1) != 3) {
    throw ShapeError("efe_expand: anchors must be [" + std::to_string(n) + ", 3], got " +
                     to_string(anchors.shape()));
  }
  IndexList copy(static_cast<std::size_t>(r * n));
  for (Index j = 0; j < r; ++j) {
    std::fill_n(copy.begin() + j * n, n, j);
  }
  const Tensor codes = gather(reg.get(prefix + ".codes"), copy);
  const Tensor h = mlp(reg, prefix + ".mlp", 2, concat({tile(features, 0, r), codes}, 1));

  EFEResult out;
  out.features = h;
  // the code also feeds the offset head so copies stay apart when h is all zero
  out.offsets = affine(reg, prefix + ".offset", concat({h, codes}, 1));
  out.coords = add(tile(anchors, 0, r), out.offsets);
  return out;
}

}  // namespace vrc
