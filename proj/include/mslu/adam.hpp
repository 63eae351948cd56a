#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mslu/params.hpp"

namespace mslu {

struct AdamConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over one ParamSet. Coordinates whose gradient is exactly
// zero are skipped (parameter and moments untouched), so a zero gradient is
// the identity for any optimizer state.
class Adam {
 public:
  Adam(const ParamSet& params, AdamConfig config);

  // Minimizes: params -= lr * m_hat / (sqrt(v_hat) + eps).
  void descend(ParamSet& params, std::span<const Tensor> grads);
  // Maximizes: the same update with the gradient sign flipped.
  void ascend(ParamSet& params, std::span<const Tensor> grads);

  std::uint64_t steps() const noexcept { return step_; }
  const AdamConfig& config() const noexcept { return config_; }
  const std::vector<Tensor>& first_moment() const noexcept { return m_; }
  const std::vector<Tensor>& second_moment() const noexcept { return v_; }

 private:
  void apply(ParamSet& params, std::span<const Tensor> grads, double sign);

  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::uint64_t step_ = 0;
};

}  // namespace mslu
