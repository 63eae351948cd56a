#include "mslu/reward.hpp"

#include <algorithm>
#include <cmath>

#include "mslu/errors.hpp"

namespace mslu {

RewardModel RewardModel::create(ParamSet& params, const std::string& prefix, std::size_t labels,
                                std::size_t features, std::size_t hidden, Rng& rng) {
  if (labels == 0 || features == 0 || hidden == 0)
    throw InputError("reward '" + prefix + "' needs positive dimensions");
  RewardModel r;
  r.labels = labels;
  r.features = features;
  r.rows = LstmLayer::create(params, prefix + ".rows", features, hidden, rng);
  r.row_score = Linear::create(params, prefix + ".row_score", hidden, 1, rng);
  r.weight = params.add(prefix + ".w", xavier_uniform(1, labels, rng));
  r.bias = params.add(prefix + ".b", Tensor(Shape{1}, 0.0));
  return r;
}

Var RewardModel::score(std::span<const Var> bound, Var masked, Var c_f) const {
  const Tensor& M = masked.value();
  if (M.rank() != 2 || M.rows() != labels || M.cols() != features || c_f.value().size() != features)
    throw DimensionError("reward: M " + shape_string(M.shape()) + ", c_f " + shape_string(c_f.value().shape()) +
                         " for k=" + std::to_string(labels) + ", m=" + std::to_string(features));
  Tape& tape = *masked.tape;
  const LstmWeights w = rows.bind(bound);
  LstmState s = rows.zero_state(tape);
  std::vector<Var> per_row;
  per_row.reserve(labels);
  for (std::size_t i = 0; i < labels; ++i) {
    s = lstm_cell(ad::row(masked, i), s, w);
    per_row.push_back(row_score.apply(bound, s.h));
  }
  const Var features_k = ad::concat(per_row) + ad::matvec(masked, c_f);
  return ad::softsign(ad::affine(bound[weight], features_k, bound[bias]));
}

double RewardModel::reward(const ParamSet& params, const Tensor& masked, const Tensor& c_f) const {
  Tape tape;
  const auto bound = params.bind(tape, false);
  return score(bound, tape.constant(masked), tape.constant(c_f)).scalar();
}

std::vector<double> boltzmann(std::span<const double> rewards) {
  if (rewards.empty()) throw InputError("boltzmann over an empty reward list");
  for (double r : rewards)
    if (!std::isfinite(r)) throw NumericalError("boltzmann: non-finite reward");
  const double top = *std::max_element(rewards.begin(), rewards.end());
  std::vector<double> p(rewards.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += (p[i] = std::exp(rewards[i] - top));
  for (double& x : p) x /= total;
  return p;
}

}  // namespace mslu
