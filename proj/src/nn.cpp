#include "vrc/nn.hpp"

namespace vrc {

void add_affine(ParamRegistry& reg, const std::string& path, Index cin, Index cout, Rng& rng,
                double init_scale) {
  if (cin < 1 || cout < 1) {
    throw ShapeError("add_affine: " + path + " needs positive widths, got " +
                     std::to_string(cin) + "x" + std::to_string(cout));
  }
  Tensor& w = reg.add_uniform(path + ".weight", {cin, cout}, cin, rng);
  if (init_scale != 1.0) w.mutable_values() *= init_scale;
  reg.add(path + ".bias", {cout});
}

Tensor affine(const ParamRegistry& reg, const std::string& path, const Tensor& x) {
  return linear(x, reg.get(path + ".weight"), reg.get(path + ".bias"));
}

void add_mlp(ParamRegistry& reg, const std::string& path, const std::vector<Index>& widths,
             Rng& rng) {
  if (widths.size() < 2) throw ShapeError("add_mlp: " + path + " needs at least two widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    add_affine(reg, path + "." + std::to_string(i), widths[i], widths[i + 1], rng);
  }
}

Tensor mlp(const ParamRegistry& reg, const std::string& path, std::size_t layers, const Tensor& x,
           bool relu_last) {
  Tensor h = x;
  for (std::size_t i = 0; i < layers; ++i) {
    h = affine(reg, path + "." + std::to_string(i), h);
    if (relu_last || i + 1 < layers) h = relu(h);
  }
  return h;
}

void zero_params(ParamRegistry& reg, const std::string& path) {
  bool any = false;
  for (const auto& [name, p] : reg.entries()) {
    if (name == path || name.rfind(path + ".", 0) == 0) {
      reg.get(name).mutable_values().setZero();
      any = true;
    }
  }
  if (!any) throw std::invalid_argument("zero_params: no parameters under '" + path + "'");
}

}  // namespace vrc
