#include "mslu/layers.hpp"

#include "mslu/errors.hpp"

namespace mslu {

LstmState lstm_cell(Var x, const LstmState& prev, const LstmWeights& w) {
  const Tensor& wx = w.input_weights.value();
  const Tensor& wh = w.recurrent_weights.value();
  const Tensor& b = w.bias.value();
  const std::size_t hidden = prev.h.value().size();
  if (wx.rank() != 2 || wh.rank() != 2 || wx.rows() != 4 * hidden || wh.rows() != 4 * hidden ||
      wh.cols() != hidden || b.size() != 4 * hidden || wx.cols() != x.value().size() ||
      prev.c.value().size() != hidden)
    throw DimensionError("lstm_cell: x " + shape_string(x.value().shape()) + ", h " +
                         shape_string(prev.h.value().shape()) + ", c " + shape_string(prev.c.value().shape()) +
                         ", Wx " + shape_string(wx.shape()) + ", Wh " + shape_string(wh.shape()) + ", b " +
                         shape_string(b.shape()));

  const Var z = ad::add(ad::add(ad::matvec(w.input_weights, x), ad::matvec(w.recurrent_weights, prev.h)), w.bias);
  const Var i = ad::sigmoid(ad::slice(z, 0, hidden));
  const Var f = ad::sigmoid(ad::slice(z, hidden, hidden));
  const Var o = ad::sigmoid(ad::slice(z, 2 * hidden, hidden));
  const Var g = ad::tanh(ad::slice(z, 3 * hidden, hidden));
  const Var c = f * prev.c + i * g;
  const Var h = o * ad::tanh(c);
  return {h, c};
}

std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev,
                                    const Tensor& input_weights, const Tensor& recurrent_weights,
                                    const Tensor& bias) {
  Tape tape;
  const LstmWeights w{tape.constant(input_weights), tape.constant(recurrent_weights), tape.constant(bias)};
  const LstmState out = lstm_cell(tape.constant(x), {tape.constant(h_prev), tape.constant(c_prev)}, w);
  return {out.h.value(), out.c.value()};
}

LstmLayer LstmLayer::create(ParamSet& params, const std::string& prefix, std::size_t input, std::size_t hidden,
                            Rng& rng) {
  LstmLayer layer;
  layer.input = input;
  layer.hidden = hidden;
  layer.input_weights = params.add(prefix + ".wx", xavier_uniform(4 * hidden, input, rng));
  layer.recurrent_weights = params.add(prefix + ".wh", xavier_uniform(4 * hidden, hidden, rng));
  layer.bias = params.add(prefix + ".b", Tensor(Shape{4 * hidden}, 0.0));
  return layer;
}

LstmWeights LstmLayer::bind(std::span<const Var> bound) const {
  return {bound[input_weights], bound[recurrent_weights], bound[bias]};
}

LstmState LstmLayer::zero_state(Tape& tape) const {
  return {tape.constant(Tensor(Shape{hidden}, 0.0)), tape.constant(Tensor(Shape{hidden}, 0.0))};
}

Linear Linear::create(ParamSet& params, const std::string& prefix, std::size_t input, std::size_t output, Rng& rng) {
  Linear layer;
  layer.input = input;
  layer.output = output;
  layer.weight = params.add(prefix + ".w", xavier_uniform(output, input, rng));
  layer.bias = params.add(prefix + ".b", Tensor(Shape{output}, 0.0));
  return layer;
}

Var Linear::apply(std::span<const Var> bound, Var x) const { return ad::affine(bound[weight], x, bound[bias]); }

AttentionPool AttentionPool::create(ParamSet& params, const std::string& prefix, std::size_t state, std::size_t attn,
                                    Rng& rng) {
  AttentionPool pool;
  pool.projection = Linear::create(params, prefix + ".proj", state, attn, rng);
  pool.context = params.add(prefix + ".v", xavier_uniform(1, attn, rng));
  return pool;
}

AttentionPool::Result AttentionPool::apply(std::span<const Var> bound, std::span<const Var> states) const {
  if (states.empty()) throw InputError("attention over an empty sequence");
  std::vector<Var> scores;
  scores.reserve(states.size());
  for (const Var& h : states) scores.push_back(ad::matvec(bound[context], ad::tanh(projection.apply(bound, h))));
  const Var weights = ad::softmax(ad::concat(scores));
  return {weights, ad::weighted_sum(weights, states)};
}

BiLstm BiLstm::create(ParamSet& params, const std::string& prefix, std::size_t input, std::size_t hidden, Rng& rng) {
  return {LstmLayer::create(params, prefix + ".fwd", input, hidden, rng),
          LstmLayer::create(params, prefix + ".bwd", input, hidden, rng)};
}

std::vector<Var> BiLstm::run(std::span<const Var> bound, std::span<const Var> inputs) const {
  if (inputs.empty()) throw InputError("recurrent layer over an empty sequence");
  Tape& tape = *inputs.front().tape;
  const std::size_t n = inputs.size();
  std::vector<Var> fwd(n), bwd(n);
  const LstmWeights wf = forward.bind(bound);
  const LstmWeights wb = backward.bind(bound);
  LstmState s = forward.zero_state(tape);
  for (std::size_t t = 0; t < n; ++t) fwd[t] = (s = lstm_cell(inputs[t], s, wf)).h;
  s = backward.zero_state(tape);
  for (std::size_t t = n; t-- > 0;) bwd[t] = (s = lstm_cell(inputs[t], s, wb)).h;
  std::vector<Var> out(n);
  for (std::size_t t = 0; t < n; ++t) out[t] = ad::concat({fwd[t], bwd[t]});
  return out;
}

}  // namespace mslu
