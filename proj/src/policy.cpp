#include "mslu/policy.hpp"

#include "mslu/errors.hpp"

namespace mslu {

PolicyModel PolicyModel::create(ParamSet& params, const std::string& prefix, std::size_t features,
                                std::size_t labels, std::size_t match_hidden, std::size_t hidden, Rng& rng) {
  if (features == 0 || labels == 0 || match_hidden == 0 || hidden == 0)
    throw InputError("policy '" + prefix + "' needs positive dimensions");
  PolicyModel p;
  p.labels = labels;
  p.features = features;
  p.match_hidden = Linear::create(params, prefix + ".match.hidden", 2 * features, match_hidden, rng);
  p.match_out = Linear::create(params, prefix + ".match.out", match_hidden, features, rng);
  p.cell = LstmLayer::create(params, prefix + ".cell", features + labels, hidden, rng);
  p.head = Linear::create(params, prefix + ".head", hidden, labels, rng);
  return p;
}

PolicyModel::Output PolicyModel::forward(std::span<const Var> bound, Var c_q, Var c_f, Var s_prev,
                                         const LstmState& carry) const {
  if (c_q.value().size() != features || c_f.value().size() != features || s_prev.value().size() != labels)
    throw DimensionError("policy: c_q " + shape_string(c_q.value().shape()) + ", c_f " +
                         shape_string(c_f.value().shape()) + ", s " + shape_string(s_prev.value().shape()) +
                         " for " + std::to_string(features) + " features and " + std::to_string(labels) + " labels");
  const Var g = match_out.apply(bound, ad::tanh(match_hidden.apply(bound, ad::concat({c_q, c_f}))));
  const LstmState next = lstm_cell(ad::concat({g, s_prev}), carry, cell.bind(bound));
  return {head.apply(bound, next.h), next};
}

MaskState PolicyModel::initial_state(const Mask& presence) const {
  if (presence.size() != labels)
    throw DimensionError("initial mask has " + std::to_string(presence.size()) + " entries for " +
                         std::to_string(labels) + " labels");
  MaskState s;
  s.s = presence;
  s.p = mask_to_tensor(presence);
  s.h = Tensor(Shape{cell.hidden}, 0.0);
  s.c = Tensor(Shape{cell.hidden}, 0.0);
  return s;
}

PolicyDecision policy_step(const PolicyModel& model, const ParamSet& params, const Tensor& c_q, const Tensor& c_f,
                           const MaskState& prev, MaskMode mode, std::uint64_t seed) {
  if (prev.s.size() != model.labels || prev.h.size() != model.cell.hidden || prev.c.size() != model.cell.hidden)
    throw DimensionError("policy carry does not match the model");
  Tape tape;
  const auto bound = params.bind(tape, false);
  const auto out = model.forward(bound, tape.constant(c_q), tape.constant(c_f), tape.constant(mask_to_tensor(prev.s)),
                                 {tape.constant(prev.h), tape.constant(prev.c)});
  const Tensor& logits = out.logits.value();
  PolicyDecision d;
  d.state.p = Tensor(Shape{model.labels});
  for (std::size_t i = 0; i < model.labels; ++i) d.state.p[i] = sigmoid(logits[i]);
  if (mode == MaskMode::Sample) {
    Rng rng(seed);
    d.state.s = sample_mask(d.state.p, rng);
  } else {
    d.state.s = greedy_mask(d.state.p);
  }
  d.state.h = out.carry.h.value();
  d.state.c = out.carry.c.value();
  d.log_prob = mask_log_prob(logits, d.state.s);
  return d;
}

Mask sample_mask(const Tensor& p, Rng& rng) {
  Mask s(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) s[i] = rng.bernoulli(p[i]) ? 1 : 0;
  return s;
}

Mask greedy_mask(const Tensor& p) {
  Mask s(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) s[i] = p[i] >= 0.5 ? 1 : 0;
  return s;
}

double mask_log_prob(const Tensor& logits, const Mask& s) {
  if (logits.size() != s.size())
    throw DimensionError("mask of " + std::to_string(s.size()) + " for " + std::to_string(logits.size()) + " logits");
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) total += log_sigmoid(s[i] ? logits[i] : -logits[i]);
  return total;
}

Var mask_log_prob(Var logits, const Mask& s) {
  if (logits.value().size() != s.size())
    throw DimensionError("mask of " + std::to_string(s.size()) + " for " +
                         std::to_string(logits.value().size()) + " logits");
  Tensor signs(Shape{s.size()});
  for (std::size_t i = 0; i < s.size(); ++i) signs[i] = s[i] ? 1.0 : -1.0;
  return ad::sum(ad::log_sigmoid(ad::mul(logits, logits.tape->constant(std::move(signs)))));
}

Tensor mask_to_tensor(const Mask& s) {
  Tensor t(Shape{s.size()});
  for (std::size_t i = 0; i < s.size(); ++i) t[i] = s[i] ? 1.0 : 0.0;
  return t;
}

Tensor mask_candidates(const Mask& s, const Tensor& candidates) {
  if (candidates.rank() != 2 || candidates.rows() != s.size())
    throw DimensionError("mask of " + std::to_string(s.size()) + " for candidates " +
                         shape_string(candidates.shape()));
  Tensor out(candidates.shape(), 0.0);
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i]) {
      const auto src = candidates.row(i);
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
  return out;
}

}  // namespace mslu
