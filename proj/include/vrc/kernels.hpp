#pragma once

#include "vrc/geometry.hpp"
#include "vrc/nn.hpp"

#include <array>

namespace vrc {

inline Points as_points(const Tensor& t) {
  if (t.rank() != 2 || t.dim(1) != 3) throw ShapeError("as_points: expected [N, 3], got " + to_string(t.shape()));
  return Eigen::Map<const Points>(t.values().data(), t.dim(0), 3);
}

inline Tensor as_tensor(const Points& p, bool requires_grad = false) {
  return Tensor::from({p.rows(), 3}, Eigen::Map<const Eigen::VectorXd>(p.data(), p.size()),
                      requires_grad);
}

/// Point self-attention over a k-neighbourhood.
///   sigma, xi: c_in -> c_mid     beta: c_in -> c_out
///   gamma: (1 + k) c_mid -> c_out -> k c_out   (one weight vector per neighbour)
struct PSAConfig {
  Index k = 8;
  Index c_in = 16;
  Index c_mid = 8;
  Index c_out = 16;

  void validate() const;
};

void add_psa(ParamRegistry& reg, const std::string& prefix, const PSAConfig& cfg, Rng& rng);

/// y_i = sum_j alpha_ij * beta(x_j) over the first cfg.k columns of `neighbors`
/// (ascending distance, smaller index on ties).
Tensor psa_forward(const ParamRegistry& reg, const std::string& prefix, const PSAConfig& cfg,
                   const Tensor& features, const NeighborTable& neighbors);

/// Two PSA branches with different neighbourhood sizes fused by per-channel
/// softmax gates.
struct PSKConfig {
  std::array<Index, 2> branch_ks{8, 16};
  Index c_in = 16;
  Index c = 16;
  Index c_mid = 8;

  Index reduced_width() const { return std::max<Index>(c / 4, 8); }
  Index max_k() const { return std::max(branch_ks[0], branch_ks[1]); }
  PSAConfig branch(int b) const { return {branch_ks[b], c_in, c_mid, c}; }
  void validate() const;
};

void add_psk(ParamRegistry& reg, const std::string& prefix, const PSKConfig& cfg, Rng& rng);

struct PSKResult {
  Tensor out;     // [N, c]
  Tensor gate_a;  // [1, c]
  Tensor gate_b;  // [1, c]
};

/// `neighbors` needs at least cfg.max_k() columns.
PSKResult psk_forward(const ParamRegistry& reg, const std::string& prefix, const PSKConfig& cfg,
                      const Tensor& features, const NeighborTable& neighbors);
PSKResult psk_forward(const ParamRegistry& reg, const std::string& prefix, const PSKConfig& cfg,
                      const Tensor& features, const Points& coords);

/// PSK plus a residual path; the residual is an affine projection only when
/// c_in != c.
void add_rpsk(ParamRegistry& reg, const std::string& prefix, const PSKConfig& cfg, Rng& rng);
Tensor rpsk_forward(const ParamRegistry& reg, const std::string& prefix, const PSKConfig& cfg,
                    const Tensor& features, const NeighborTable& neighbors);
Tensor rpsk_forward(const ParamRegistry& reg, const std::string& prefix, const PSKConfig& cfg,
                    const Tensor& features, const Points& coords);

struct PoolResult {
  Tensor features;  // [M, C]
  Points coords;    // [M, 3]
  IndexList kept;   // ascending indices into the input cloud
};

/// M = ceil(ratio N) FPS centres; each takes the channelwise max over its k
/// nearest input points. Centres are returned in ascending input order.
PoolResult ep_pool(const Tensor& features, const Points& coords, double ratio, Index k);

/// Inverse-distance interpolation from the 3 nearest coarse points (fewer when
/// M < 3), weights 1/(d^2 + 1e-8), then concatenation with `skip`. A fine point
/// that coincides with a coarse point takes that feature exactly.
Tensor eu_unpool(const Tensor& coarse_features, const Points& coarse_coords,
                 const Points& fine_coords, const Tensor& skip);
/// Same, with the interpolation weights differentiable in both coordinate sets.
Tensor eu_unpool(const Tensor& coarse_features, const Tensor& coarse_xyz, const Tensor& fine_xyz,
                 const Tensor& skip);

struct EFEConfig {
  Index c_in = 16;
  Index c_code = 8;
  Index c_out = 16;
  Index up_ratio = 2;

  void validate() const;
};

/// The offset head starts at `offset_init_scale` times the usual init.
void add_efe(ParamRegistry& reg, const std::string& prefix, const EFEConfig& cfg, Rng& rng,
             double offset_init_scale = 0.01);

struct EFEResult {
  Tensor features;  // [r N, c_out]; row j N + i is copy j of point i
  Tensor offsets;   // [r N, 3]
  Tensor coords;    // tile(anchors) + offsets
};

EFEResult efe_expand(const ParamRegistry& reg, const std::string& prefix, const EFEConfig& cfg,
                     const Tensor& features, const Tensor& anchors);

}  // namespace vrc
