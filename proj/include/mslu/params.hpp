#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mslu/autodiff.hpp"
#include "mslu/random.hpp"
#include "mslu/tensor.hpp"

namespace mslu {

// Ordered collection of named parameter tensors. Models address their
// parameters by the index returned from add().
class ParamSet {
 public:
  std::size_t add(std::string name, Tensor init);

  std::size_t size() const noexcept { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& operator[](std::size_t i) { return values_[i]; }
  const Tensor& operator[](std::size_t i) const { return values_[i]; }
  std::optional<std::size_t> find(const std::string& name) const;

  std::size_t scalar_count() const noexcept;
  bool all_finite() const noexcept;
  void zero();

  // Pushes every parameter on the tape, tracked or as constants.
  std::vector<Var> bind(Tape& tape, bool track) const;
  // Reads gradients for a binding produced by bind().
  std::vector<Tensor> grads(const Tape& tape, std::span<const Var> bound) const;
  std::vector<Tensor> zeros_like() const;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

Tensor xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng);

// In-place helpers over gradient lists aligned with a ParamSet.
void add_into(std::vector<Tensor>& acc, std::span<const Tensor> g);
void scale_all(std::vector<Tensor>& g, double factor);

}  // namespace mslu
