#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mslu/layers.hpp"

namespace mslu {

using Mask = std::vector<int>;  // one 0/1 entry per label

// Policy carry between rounds: the last mask, its probabilities and the
// recurrent state.
struct MaskState {
  Mask s;
  Tensor p;
  Tensor h;
  Tensor c;

  friend bool operator==(const MaskState&, const MaskState&) = default;
};

enum class MaskMode { Sample, Greedy };

// s_t from (c_q, c_f, s_{t-1}, carry):
//   g = W2 tanh(W1 [c_q; c_f] + b1) + b2
//   (h, c) = LSTM([g; s_{t-1}], carry),  logits = Wo h + bo,  p = sigmoid(logits)
struct PolicyModel {
  Linear match_hidden;
  Linear match_out;
  LstmLayer cell;
  Linear head;
  std::size_t labels = 0, features = 0;

  static PolicyModel create(ParamSet& params, const std::string& prefix, std::size_t features, std::size_t labels,
                            std::size_t match_hidden, std::size_t hidden, Rng& rng);

  struct Output {
    Var logits;
    LstmState carry;
  };
  Output forward(std::span<const Var> bound, Var c_q, Var c_f, Var s_prev, const LstmState& carry) const;

  // s_0: presence of the round-0 candidates, zero carry.
  MaskState initial_state(const Mask& presence) const;
};

struct PolicyDecision {
  MaskState state;
  double log_prob = 0.0;
};

// One policy round on plain tensors. SAMPLE draws independent Bernoulli(p_i)
// from a generator seeded with `seed`; GREEDY keeps label i iff p_i >= 0.5.
PolicyDecision policy_step(const PolicyModel& model, const ParamSet& params, const Tensor& c_q, const Tensor& c_f,
                           const MaskState& prev, MaskMode mode, std::uint64_t seed);

Mask sample_mask(const Tensor& p, Rng& rng);
Mask greedy_mask(const Tensor& p);

// sum_i log(p_i if s_i else 1 - p_i), evaluated from the logits.
double mask_log_prob(const Tensor& logits, const Mask& s);
Var mask_log_prob(Var logits, const Mask& s);

Tensor mask_to_tensor(const Mask& s);

// diag(s) * C, row by row: each row is copied or zeroed, never scaled.
Tensor mask_candidates(const Mask& s, const Tensor& candidates);

}  // namespace mslu
