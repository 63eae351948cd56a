#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mslu/autodiff.hpp"
#include "mslu/params.hpp"

namespace mslu {

struct LstmWeights {
  Var input_weights;      // 4H x I
  Var recurrent_weights;  // 4H x H
  Var bias;               // 4H
};

struct LstmState {
  Var h;
  Var c;
};

// One LSTM step; gate blocks are stacked as [input, forget, output, candidate].
//   i,f,o = sigmoid(.), g = tanh(.), c' = f*c + i*g, h' = o*tanh(c').
LstmState lstm_cell(Var x, const LstmState& prev, const LstmWeights& w);

// Same step on plain tensors.
std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev,
                                    const Tensor& input_weights, const Tensor& recurrent_weights,
                                    const Tensor& bias);

// Parameter layouts. Each registers its tensors in a ParamSet and remembers
// their indices; bind() picks the matching Vars out of a tape binding.
struct LstmLayer {
  std::size_t input_weights = 0, recurrent_weights = 0, bias = 0;
  std::size_t input = 0, hidden = 0;

  static LstmLayer create(ParamSet& params, const std::string& prefix, std::size_t input, std::size_t hidden,
                          Rng& rng);
  LstmWeights bind(std::span<const Var> bound) const;
  LstmState zero_state(Tape& tape) const;
};

struct Linear {
  std::size_t weight = 0, bias = 0;
  std::size_t input = 0, output = 0;

  static Linear create(ParamSet& params, const std::string& prefix, std::size_t input, std::size_t output, Rng& rng);
  Var apply(std::span<const Var> bound, Var x) const;
};

// Additive attention with a learned context vector:
//   score_j = v . tanh(W h_j + b),  alpha = softmax(score),  out = sum_j alpha_j h_j.
struct AttentionPool {
  Linear projection;
  std::size_t context = 0;

  static AttentionPool create(ParamSet& params, const std::string& prefix, std::size_t state, std::size_t attn,
                              Rng& rng);
  struct Result {
    Var weights;
    Var pooled;
  };
  Result apply(std::span<const Var> bound, std::span<const Var> states) const;
};

struct BiLstm {
  LstmLayer forward;
  LstmLayer backward;

  static BiLstm create(ParamSet& params, const std::string& prefix, std::size_t input, std::size_t hidden, Rng& rng);
  // Per position: [h_forward ; h_backward], 2H wide.
  std::vector<Var> run(std::span<const Var> bound, std::span<const Var> inputs) const;
};

}  // namespace mslu
