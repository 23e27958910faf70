#pragma once

#include "vrc/optim.hpp"

#include <string>
#include <vector>

namespace vrc {

/// Registers "<path>.weight" [cin, cout] (uniform init) and "<path>.bias" [cout] (zeros).
void add_affine(ParamRegistry& reg, const std::string& path, Index cin, Index cout, Rng& rng,
                double init_scale = 1.0);
Tensor affine(const ParamRegistry& reg, const std::string& path, const Tensor& x);
inline Tensor affine_relu(const ParamRegistry& reg, const std::string& path, const Tensor& x) {
  return relu(affine(reg, path, x));
}

/// Shared per-point MLP "<path>.0", "<path>.1", ... through `widths`.
void add_mlp(ParamRegistry& reg, const std::string& path, const std::vector<Index>& widths,
             Rng& rng);
/// ReLU after every layer, or after all but the last when `relu_last` is false.
Tensor mlp(const ParamRegistry& reg, const std::string& path, std::size_t layers,
           const Tensor& x, bool relu_last = true);

/// Sets every parameter under `path` to zero.
void zero_params(ParamRegistry& reg, const std::string& path);

}  // namespace vrc
