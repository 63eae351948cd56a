#include "mslu/gradient_suite.hpp"

#include "mslu/encoders.hpp"
#include "mslu/policy.hpp"
#include "mslu/reward.hpp"
#include "mslu/tagger.hpp"

namespace mslu {
namespace {

// Xavier leaves biases at zero; random biases exercise more of each backward pass.
void jitter_biases(ParamSet& params, Rng& rng) {
  for (std::size_t p = 0; p < params.size(); ++p)
    if (params[p].rank() == 1)
      for (auto& v : params[p].values()) v = rng.uniform(-0.5, 0.5);
}

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

std::vector<std::size_t> random_ids(std::size_t n, std::size_t vocab, Rng& rng) {
  std::vector<std::size_t> ids(n);
  for (auto& id : ids) id = rng.index(vocab);
  return ids;
}

Mask random_mask(std::size_t k, Rng& rng) {
  Mask s(k);
  for (auto& b : s) b = rng.bernoulli(0.5) ? 1 : 0;
  return s;
}

GradientSuiteEntry check(std::string name, const TapeObjective& f, const ParamSet& params,
                         const GradientSuiteConfig& config) {
  GradientSuiteEntry e;
  e.component = std::move(name);
  e.report = grad_check(f, params, config.check);
  e.passed = e.report.max_relative_error < config.tolerance;
  return e;
}

}  // namespace

std::vector<GradientSuiteEntry> run_gradient_suite(const GradientSuiteConfig& c) {
  std::vector<GradientSuiteEntry> out;
  Rng rng(c.seed);
  const std::size_t k = c.labels, m = c.features;

  for (const char* name : {"query_encoder", "feedback_encoder"}) {
    ParamSet params;
    const auto enc = SentenceEncoder::create(params, name, c.vocab, m, c.hidden, c.attention, m, rng);
    jitter_biases(params, rng);
    const auto ids = random_ids(c.sentence_length, c.vocab, rng);
    const Tensor w = random_tensor({m}, rng);
    out.push_back(check(
        name,
        [&](Tape& tape, std::span<const Var> bound) { return ad::dot(tape.constant(w), enc.encode(bound, ids)); },
        params, c));
  }

  {
    ParamSet params;
    const auto tagger = Tagger::create(params, "tagger", c.vocab, m, c.hidden, c.attention, 2 * k - 1, rng);
    jitter_biases(params, rng);
    const auto ids = random_ids(c.sentence_length, c.vocab, rng);
    const auto gold = random_ids(c.sentence_length, 2 * k - 1, rng);
    out.push_back(check(
        "tagger_loss", [&](Tape&, std::span<const Var> bound) { return tagger.loss(bound, ids, gold); }, params,
        c));
  }

  {
    ParamSet params;
    const auto policy = PolicyModel::create(params, "policy", m, k, c.hidden, c.hidden, rng);
    jitter_biases(params, rng);
    const Tensor c_q = random_tensor({m}, rng);
    const Tensor c_f1 = random_tensor({m}, rng), c_f2 = random_tensor({m}, rng);
    const Mask s0 = random_mask(k, rng), s1 = random_mask(k, rng), s2 = random_mask(k, rng);
    out.push_back(check(
        "policy_log_prob",
        [&](Tape& tape, std::span<const Var> bound) {
          const Var q = tape.constant(c_q);
          const auto r1 = policy.forward(bound, q, tape.constant(c_f1), tape.constant(mask_to_tensor(s0)),
                                         policy.cell.zero_state(tape));
          const auto r2 = policy.forward(bound, q, tape.constant(c_f2), tape.constant(mask_to_tensor(s1)), r1.carry);
          return mask_log_prob(r1.logits, s1) + mask_log_prob(r2.logits, s2);
        },
        params, c));
  }

  {
    ParamSet params;
    const auto reward = RewardModel::create(params, "reward", k, m, c.hidden, rng);
    jitter_biases(params, rng);
    const Tensor C = random_tensor({k, m}, rng);
    const Tensor c_f = random_tensor({m}, rng);
    const Tensor expert = mask_candidates(random_mask(k, rng), C);
    const Tensor sampled = mask_candidates(random_mask(k, rng), C);
    out.push_back(check(
        "reward",
        [&](Tape& tape, std::span<const Var> bound) {
          return reward.score(bound, tape.constant(expert), tape.constant(c_f));
        },
        params, c));
    out.push_back(check(
        "reward_objective",
        [&](Tape& tape, std::span<const Var> bound) {
          const Var f = tape.constant(c_f);
          return reward.score(bound, tape.constant(expert), f) - reward.score(bound, tape.constant(sampled), f);
        },
        params, c));
  }
  return out;
}

}  // namespace mslu
