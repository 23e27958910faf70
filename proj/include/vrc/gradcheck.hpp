#pragma once

#include "vrc/tensor.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace vrc {

using GraphBuilder = std::function<Tensor(const std::vector<Tensor>&)>;

/// Max over all input coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|),
/// numeric gradients from central differences with step `eps`.
/// Inputs are perturbed in place and restored before returning.
double grad_check(const GraphBuilder& build, std::vector<Tensor> inputs, double eps = 1e-5);

}  // namespace vrc

namespace vrc {

struct GradCheckEntry {
  std::string module;
  std::string name;
  double error = 0.0;
};

/// Module names accepted by run_gradcheck_suite.
std::vector<std::string> gradcheck_modules();

/// Finite-difference checks of every primitive, kernel and network stage on
/// small random problems. An empty `module` runs everything.
std::vector<GradCheckEntry> run_gradcheck_suite(const std::string& module = "",
                                                std::uint64_t seed = 0);

}  // namespace vrc
