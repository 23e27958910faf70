#include "vrc/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace vrc {

double grad_check(const GraphBuilder& build, std::vector<Tensor> inputs, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");
  std::vector<Eigen::VectorXd> analytic;
  {
    const Tensor loss = build(inputs);
    const Gradients g = backward(loss);
    for (const auto& t : inputs) analytic.push_back(g.of(t));
  }

  NoGradGuard no_grad;
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Eigen::VectorXd& x = inputs[k].mutable_values();
    for (Index i = 0; i < x.size(); ++i) {
      const double saved = x[i];
      x[i] = saved + eps;
      const double up = build(inputs).item();
      x[i] = saved - eps;
      const double down = build(inputs).item();
      x[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k][i];
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace vrc
