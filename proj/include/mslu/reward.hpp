#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mslu/layers.hpp"

namespace mslu {

// R(M, c_f) = softsign(W (f(M) + M c_f) + b).
// f runs an LSTM down the k rows of M and maps each step's hidden state to a
// scalar with a shared projection, giving a k-vector like M c_f.
struct RewardModel {
  LstmLayer rows;
  Linear row_score;     // H -> 1
  std::size_t weight = 0;  // 1 x k
  std::size_t bias = 0;    // 1
  std::size_t labels = 0, features = 0;

  static RewardModel create(ParamSet& params, const std::string& prefix, std::size_t labels, std::size_t features,
                            std::size_t hidden, Rng& rng);

  Var score(std::span<const Var> bound, Var masked, Var c_f) const;
  double reward(const ParamSet& params, const Tensor& masked, const Tensor& c_f) const;
};

// exp(r_i) / sum_j exp(r_j), shifted by max r for stability.
std::vector<double> boltzmann(std::span<const double> rewards);

}  // namespace mslu
