#include "mslu/params.hpp"

#include <cmath>

#include "mslu/errors.hpp"

namespace mslu {

std::size_t ParamSet::add(std::string name, Tensor init) {
  if (find(name)) throw InputError("duplicate parameter name '" + name + "'");
  names_.push_back(std::move(name));
  values_.push_back(std::move(init));
  return values_.size() - 1;
}

std::optional<std::size_t> ParamSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  return std::nullopt;
}

std::size_t ParamSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : values_) n += t.size();
  return n;
}

bool ParamSet::all_finite() const noexcept {
  for (const auto& t : values_)
    if (!t.all_finite()) return false;
  return true;
}

void ParamSet::zero() {
  for (auto& t : values_) t.fill(0.0);
}

std::vector<Var> ParamSet::bind(Tape& tape, bool track) const {
  std::vector<Var> out;
  out.reserve(values_.size());
  for (const auto& t : values_) out.push_back(track ? tape.variable(t) : tape.constant(t));
  return out;
}

std::vector<Tensor> ParamSet::grads(const Tape& tape, std::span<const Var> bound) const {
  if (bound.size() != values_.size())
    throw DimensionError("binding has " + std::to_string(bound.size()) + " entries for " +
                         std::to_string(values_.size()) + " parameters");
  std::vector<Tensor> out;
  out.reserve(bound.size());
  for (const Var& v : bound) out.push_back(tape.grad(v));
  return out;
}

std::vector<Tensor> ParamSet::zeros_like() const {
  std::vector<Tensor> out;
  out.reserve(values_.size());
  for (const auto& t : values_) out.emplace_back(t.shape(), 0.0);
  return out;
}

Tensor xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor out(Shape{rows, cols});
  for (auto& v : out.values()) v = rng.uniform(-limit, limit);
  return out;
}

void add_into(std::vector<Tensor>& acc, std::span<const Tensor> g) {
  if (acc.size() != g.size()) throw DimensionError("gradient lists differ in length");
  for (std::size_t i = 0; i < acc.size(); ++i) {
    require_same_shape(acc[i], g[i], "gradient accumulate");
    auto dst = acc[i].values();
    auto src = g[i].values();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
}

void scale_all(std::vector<Tensor>& g, double factor) {
  for (auto& t : g)
    for (auto& v : t.values()) v *= factor;
}

}  // namespace mslu
