#include "mslu/adam.hpp"

#include <cmath>

#include "mslu/errors.hpp"

namespace mslu {

Adam::Adam(const ParamSet& params, AdamConfig config)
    : config_(config), m_(params.zeros_like()), v_(params.zeros_like()) {
  if (!(config_.learning_rate > 0.0)) throw InputError("Adam learning rate must be positive");
}

void Adam::descend(ParamSet& params, std::span<const Tensor> grads) { apply(params, grads, 1.0); }

void Adam::ascend(ParamSet& params, std::span<const Tensor> grads) { apply(params, grads, -1.0); }

void Adam::apply(ParamSet& params, std::span<const Tensor> grads, double sign) {
  if (grads.size() != params.size())
    throw DimensionError("Adam: " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(params.size()) + " parameters");
  for (std::size_t i = 0; i < params.size(); ++i) require_same_shape(params[i], grads[i], "Adam gradient");

  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].values();
    auto g = grads[i].values();
    auto m = m_[i].values();
    auto v = v_[i].values();
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (g[j] == 0.0) continue;
      const double gj = sign * g[j];
      m[j] = b1 * m[j] + (1.0 - b1) * gj;
      v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      p[j] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

}  // namespace mslu
