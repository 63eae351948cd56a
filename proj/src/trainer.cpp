#include "mslu/trainer.hpp"

#include <cmath>
#include <numeric>

#include "json.hpp"
#include "mslu/errors.hpp"

namespace mslu {

Mask expert_mask(const MultiRoundSample& sample, std::size_t round, const LabelSet& labels) {
  Mask s(labels.size(), 0);
  for (const auto& label : gold_delta(sample, round))
    if (auto i = labels.find(label)) s[*i] = 1;
  return s;
}

std::vector<PreparedSample> prepare_samples(const Model& model, const MultiRoundCorpus& corpus,
                                            Execution execution) {
  std::vector<PreparedSample> out(corpus.samples.size());
  for_each_index(corpus.samples.size(), execution, [&](std::size_t i) {
    const MultiRoundSample& s = corpus.samples[i];
    PreparedSample& p = out[i];
    p.query_ids = token_ids(model.vocab, s.origin.tokens);
    p.candidates.push_back(round_candidates(model, tag_round(model, s.origin.tokens)));
    p.expert.push_back(expert_mask(s, 0, model.labels));
    for (std::size_t t = 1; t <= s.rounds.size(); ++t) {
      const auto& feedback = s.rounds[t - 1].text.tokens;
      p.feedback_ids.push_back(token_ids(model.vocab, feedback));
      p.candidates.push_back(round_candidates(model, tag_round(model, s.origin.tokens, &feedback)));
      p.expert.push_back(expert_mask(s, t, model.labels));
    }
  });
  return out;
}

// ---------------------------------------------------------------- tagger

std::vector<TaggedUtterance> tagger_training_set(const MultiRoundCorpus& corpus) {
  std::vector<TaggedUtterance> out;
  for (const auto& s : corpus.samples) {
    out.push_back(s.origin);
    for (const auto& r : s.rounds) {
      TaggedUtterance u = s.origin;
      u.tokens.insert(u.tokens.end(), r.text.tokens.begin(), r.text.tokens.end());
      u.tags.insert(u.tags.end(), r.text.tags.begin(), r.text.tags.end());
      out.push_back(std::move(u));
    }
  }
  return out;
}

double tagger_epoch(Model& model, Adam& optimizer, const std::vector<TaggedUtterance>& data, std::size_t batch_size,
                    std::uint64_t seed, Execution execution) {
  if (data.empty()) throw InputError("no tagger training data");
  if (batch_size == 0) throw InputError("batch size must be at least 1");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  double loss_total = 0.0;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - start);
    std::vector<std::vector<Tensor>> grads(n);
    std::vector<double> losses(n);
    for_each_index(n, execution, [&](std::size_t b) {
      const TaggedUtterance& u = data[order[start + b]];
      std::vector<std::size_t> gold;
      gold.reserve(u.tags.size());
      for (const auto& tag : u.tags) gold.push_back(model.labels.tag_index(tag));
      Tape tape;
      const auto bound = model.tagger_params.bind(tape, true);
      const Var loss = model.tagger.loss(bound, token_ids(model.vocab, u.tokens), gold);
      tape.backward(loss);
      losses[b] = loss.scalar();
      grads[b] = model.tagger_params.grads(tape, bound);
    });
    auto g = ordered_sum(grads);
    scale_all(g, 1.0 / static_cast<double>(n));
    optimizer.descend(model.tagger_params, g);
    for (double l : losses) loss_total += l;
  }
  return loss_total / static_cast<double>(data.size());
}

// ---------------------------------------------------------------- reward step

RewardGradient mean_reward_gradient(const Model& model, std::span<const RewardExample> batch,
                                    bool with_feedback_encoder, Execution execution) {
  if (batch.empty()) throw InputError("reward step needs a non-empty batch");
  std::vector<std::vector<Tensor>> grads(batch.size()), enc_grads(batch.size());
  std::vector<double> values(batch.size());
  for_each_index(batch.size(), execution, [&](std::size_t i) {
    Tape tape;
    const auto bound = model.reward_params.bind(tape, true);
    std::vector<Var> fb;
    Var c_f;
    if (with_feedback_encoder) {
      if (batch[i].feedback_ids.empty()) throw InputError("reward example lacks feedback token ids");
      fb = model.feedback_params.bind(tape, true);
      c_f = model.feedback_encoder.encode(fb, batch[i].feedback_ids);
    } else {
      c_f = tape.constant(batch[i].c_f);
    }
    const Var r = model.reward.score(bound, tape.constant(batch[i].masked), c_f);
    tape.backward(r);
    values[i] = r.scalar();
    grads[i] = model.reward_params.grads(tape, bound);
    if (with_feedback_encoder) enc_grads[i] = model.feedback_params.grads(tape, fb);
  });
  RewardGradient out;
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.reward = ordered_sum(grads);
  scale_all(out.reward, inv);
  if (with_feedback_encoder) {
    out.feedback_encoder = ordered_sum(enc_grads);
    scale_all(out.feedback_encoder, inv);
  }
  for (double v : values) out.mean_value += v;
  out.mean_value *= inv;
  return out;
}

std::vector<Tensor> mean_reward_gradient(const Model& model, std::span<const RewardExample> batch,
                                         Execution execution) {
  return mean_reward_gradient(model, batch, false, execution).reward;
}

namespace {

std::vector<Tensor> difference(std::vector<Tensor> a, const std::vector<Tensor>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) a[i][j] -= b[i][j];
  return a;
}

}  // namespace

std::vector<Tensor> reward_objective_gradient(const Model& model, std::span<const RewardExample> expert,
                                              std::span<const RewardExample> policy, Execution execution) {
  return difference(mean_reward_gradient(model, expert, execution), mean_reward_gradient(model, policy, execution));
}

void reward_grad_step(Model& model, Adam& optimizer, std::span<const RewardExample> expert,
                      std::span<const RewardExample> policy, Execution execution) {
  optimizer.ascend(model.reward_params, reward_objective_gradient(model, expert, policy, execution));
}

// ---------------------------------------------------------------- policy step

namespace {

// Shared by sampling and by the gradient pass so both draw the same masks.
// With `gradient` set, the parameters are tracked and the score-function
// surrogate sum_t A_t log pi_t is back-propagated.
Trajectory run_trajectory(const Model& model, const PreparedSample& sample, std::uint64_t seed,
                          PolicyGradient* gradient, double baseline, bool train_encoders) {
  if (sample.rounds() == 0) throw InputError("trajectory over a sample without feedback rounds");
  Tape tape;
  const bool track = gradient != nullptr;
  const auto pb = model.policy_params.bind(tape, track);
  const auto qb = model.query_params.bind(tape, track && train_encoders);
  const auto fb = model.feedback_params.bind(tape, track && train_encoders);
  const Var c_q = model.query_encoder.encode(qb, sample.query_ids);
  LstmState carry = model.policy.cell.zero_state(tape);
  Mask prev = sample.candidates[0].presence();
  Rng rng(seed);

  Trajectory traj;
  std::vector<std::pair<Var, double>> seeds;
  for (std::size_t t = 1; t <= sample.rounds(); ++t) {
    const Var c_f = model.feedback_encoder.encode(fb, sample.feedback_ids[t - 1]);
    const auto out = model.policy.forward(pb, c_q, c_f, tape.constant(mask_to_tensor(prev)), carry);
    Tensor p(Shape{model.k()});
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = sigmoid(out.logits.value()[i]);
    Mask s = sample_mask(p, rng);
    const Var log_prob = mask_log_prob(out.logits, s);
    const double r =
        model.reward.reward(model.reward_params, mask_candidates(s, sample.candidates[t].matrix), c_f.value());
    if (gradient) {
      const double advantage = r - log_prob.scalar() - baseline;
      if (!std::isfinite(advantage))
        throw NumericalError("non-finite advantage at round " + std::to_string(t) + " (R=" + std::to_string(r) +
                             ", log pi=" + std::to_string(log_prob.scalar()) + ")");
      seeds.emplace_back(log_prob, advantage);
      gradient->advantage_sum += advantage;
    }
    traj.masks.push_back(s);
    traj.log_probs.push_back(log_prob.scalar());
    traj.rewards.push_back(r);
    traj.feedback_features.push_back(c_f.value());
    carry = out.carry;
    prev = std::move(s);
  }
  if (gradient) {
    tape.backward(seeds);
    gradient->policy = model.policy_params.grads(tape, pb);
    if (train_encoders) {
      gradient->query_encoder = model.query_params.grads(tape, qb);
      gradient->feedback_encoder = model.feedback_params.grads(tape, fb);
    } else {
      gradient->query_encoder = model.query_params.zeros_like();
      gradient->feedback_encoder = model.feedback_params.zeros_like();
    }
    for (std::size_t t = 0; t < traj.rewards.size(); ++t) {
      gradient->reward_sum += traj.rewards[t];
      gradient->log_prob_sum += traj.log_probs[t];
    }
    gradient->rounds = traj.rewards.size();
  }
  return traj;
}

}  // namespace

Trajectory sample_trajectory(const Model& model, const PreparedSample& sample, std::uint64_t seed) {
  return run_trajectory(model, sample, seed, nullptr, 0.0, false);
}

PolicyGradient trajectory_policy_gradient(const Model& model, const PreparedSample& sample, std::uint64_t seed,
                                          double baseline, bool train_encoders) {
  PolicyGradient g;
  run_trajectory(model, sample, seed, &g, baseline, train_encoders);
  return g;
}

PolicyGradient batch_policy_gradient(const Model& model, std::span<const PreparedSample* const> batch,
                                     std::span<const std::uint64_t> seeds, double baseline, bool train_encoders,
                                     Execution execution) {
  if (batch.empty()) throw InputError("policy step needs a non-empty batch");
  if (seeds.size() != batch.size()) throw DimensionError("one seed per sample required");
  std::vector<PolicyGradient> parts(batch.size());
  for_each_index(batch.size(), execution, [&](std::size_t i) {
    try {
      parts[i] = trajectory_policy_gradient(model, *batch[i], seeds[i], baseline, train_encoders);
    } catch (const NumericalError& e) {
      throw NumericalError("episode " + std::to_string(i) + ": " + e.what());
    }
  });
  PolicyGradient out = std::move(parts[0]);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    add_into(out.policy, parts[i].policy);
    add_into(out.query_encoder, parts[i].query_encoder);
    add_into(out.feedback_encoder, parts[i].feedback_encoder);
    out.reward_sum += parts[i].reward_sum;
    out.log_prob_sum += parts[i].log_prob_sum;
    out.advantage_sum += parts[i].advantage_sum;
    out.rounds += parts[i].rounds;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  scale_all(out.policy, inv);
  scale_all(out.query_encoder, inv);
  scale_all(out.feedback_encoder, inv);
  return out;
}

PolicyOptimizers::PolicyOptimizers(const Model& model, double learning_rate)
    : policy(model.policy_params, {learning_rate}),
      query_encoder(model.query_params, {learning_rate}),
      feedback_encoder(model.feedback_params, {learning_rate}) {}

double policy_grad_step(Model& model, PolicyOptimizers& optimizers, const PolicyGradient& gradient, double baseline,
                        double decay, bool update_query_encoder, bool update_feedback_encoder) {
  optimizers.policy.ascend(model.policy_params, gradient.policy);
  if (update_query_encoder) optimizers.query_encoder.ascend(model.query_params, gradient.query_encoder);
  if (update_feedback_encoder) optimizers.feedback_encoder.ascend(model.feedback_params, gradient.feedback_encoder);
  if (gradient.rounds == 0) return baseline;
  const double mean = (gradient.reward_sum - gradient.log_prob_sum) / static_cast<double>(gradient.rounds);
  return decay * baseline + (1.0 - decay) * mean;
}

std::vector<Tensor> score_function_gradient(const PolicyModel& policy, const ParamSet& params, const Tensor& c_q,
                                            const Tensor& c_f, const MaskState& prev, const Mask& mask,
                                            double advantage) {
  Tape tape;
  const auto bound = params.bind(tape, true);
  const auto out = policy.forward(bound, tape.constant(c_q), tape.constant(c_f), tape.constant(mask_to_tensor(prev.s)),
                                  {tape.constant(prev.h), tape.constant(prev.c)});
  tape.backward(mask_log_prob(out.logits, mask), advantage);
  return params.grads(tape, bound);
}

namespace {

Tensor policy_logits(const PolicyModel& policy, const ParamSet& params, const Tensor& c_q, const Tensor& c_f,
                     const MaskState& prev) {
  Tape tape;
  const auto bound = params.bind(tape, false);
  return policy
      .forward(bound, tape.constant(c_q), tape.constant(c_f), tape.constant(mask_to_tensor(prev.s)),
               {tape.constant(prev.h), tape.constant(prev.c)})
      .logits.value();
}

}  // namespace

// Enumerates all 2^k masks. With independent Bernoulli heads the expectation
// of A d log pi / d logit_i is, pairing the masks that differ only in bit i,
//   w_i = sum_rest pi_rest(rest) p_i (1 - p_i) (A(rest, 1) - A(rest, 0)),
// so a constant advantage gives exactly zero weights. The parameter gradient
// is then w back-propagated through the logits.
std::vector<Tensor> exact_policy_gradient(const PolicyModel& policy, const ParamSet& params, const Tensor& c_q,
                                          const Tensor& c_f, const MaskState& prev, const AdvantageFn& advantage) {
  const std::size_t k = policy.labels;
  if (k > 16) throw InputError("exact enumeration is limited to 16 labels");
  const Tensor logits = policy_logits(policy, params, c_q, c_f, prev);
  const std::size_t count = std::size_t{1} << k;
  std::vector<double> adv(count);
  for (std::size_t bits = 0; bits < count; ++bits) {
    Mask s(k);
    for (std::size_t i = 0; i < k; ++i) s[i] = (bits >> i) & 1;
    adv[bits] = advantage(s, mask_log_prob(logits, s));
  }
  Tensor w(Shape{k});
  for (std::size_t i = 0; i < k; ++i) {
    const double p_i = sigmoid(logits[i]);
    double total = 0.0;
    for (std::size_t bits = 0; bits < count; ++bits) {
      if ((bits >> i) & 1) continue;
      double rest = 1.0;
      for (std::size_t j = 0; j < k; ++j) {
        if (j == i) continue;
        const double p_j = sigmoid(logits[j]);
        rest *= ((bits >> j) & 1) ? p_j : 1.0 - p_j;
      }
      total += rest * (adv[bits | (std::size_t{1} << i)] - adv[bits]);
    }
    w[i] = p_i * (1.0 - p_i) * total;
  }
  Tape tape;
  const auto bound = params.bind(tape, true);
  const auto out = policy.forward(bound, tape.constant(c_q), tape.constant(c_f), tape.constant(mask_to_tensor(prev.s)),
                                  {tape.constant(prev.h), tape.constant(prev.c)});
  tape.backward(ad::dot(out.logits, tape.constant(w)));
  return params.grads(tape, bound);
}

GradientEstimate monte_carlo_policy_gradient(const PolicyModel& policy, const ParamSet& params, const Tensor& c_q,
                                             const Tensor& c_f, const MaskState& prev, const AdvantageFn& advantage,
                                             std::size_t samples, std::uint64_t seed, Execution execution) {
  if (samples < 2) throw InputError("Monte-Carlo estimate needs at least two samples");
  const Tensor logits = policy_logits(policy, params, c_q, c_f, prev);
  Tensor p(Shape{policy.labels});
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = sigmoid(logits[i]);

  // Fixed-size blocks keep the reduction order independent of the thread count.
  constexpr std::size_t kBlock = 1000;
  const std::size_t blocks = (samples + kBlock - 1) / kBlock;
  std::vector<std::vector<Tensor>> sums(blocks), squares(blocks);
  for_each_index(blocks, execution, [&](std::size_t b) {
    sums[b] = params.zeros_like();
    squares[b] = params.zeros_like();
    for (std::size_t n = b * kBlock; n < std::min(samples, (b + 1) * kBlock); ++n) {
      Rng rng(mix_seed(seed, n));
      const Mask s = sample_mask(p, rng);
      const auto g = score_function_gradient(policy, params, c_q, c_f, prev, s, advantage(s, mask_log_prob(logits, s)));
      for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g[i].size(); ++j) {
          sums[b][i][j] += g[i][j];
          squares[b][i][j] += g[i][j] * g[i][j];
        }
    }
  });
  GradientEstimate est;
  est.mean = ordered_sum(sums);
  est.standard_error = ordered_sum(squares);
  const double n = static_cast<double>(samples);
  for (std::size_t i = 0; i < est.mean.size(); ++i)
    for (std::size_t j = 0; j < est.mean[i].size(); ++j) {
      const double mean = est.mean[i][j] / n;
      const double var = std::max(0.0, (est.standard_error[i][j] / n - mean * mean) * n / (n - 1.0));
      est.mean[i][j] = mean;
      est.standard_error[i][j] = std::sqrt(var / n);
    }
  return est;
}

// ---------------------------------------------------------------- evaluation

std::vector<std::vector<SlotFillingTable>> rollout_tables(const Model& model, const MultiRoundCorpus& corpus,
                                                          std::size_t rounds, MaskSource source,
                                                          Execution execution) {
  std::vector<std::vector<SlotFillingTable>> out(corpus.samples.size());
  for_each_index(corpus.samples.size(), execution, [&](std::size_t i) {
    const MultiRoundSample& s = corpus.samples[i];
    if (s.rounds.size() < rounds) return;
    Rollout r(model, source);
    out[i].push_back(r.start(s.origin.tokens).table);
    for (std::size_t t = 1; t <= rounds; ++t) out[i].push_back(r.feedback(s.rounds[t - 1].text.tokens).table);
  });
  return out;
}

Evaluation evaluate(const Model& model, const MultiRoundCorpus& corpus, std::size_t rounds, MaskSource source,
                    Execution execution) {
  if (rounds == 0) throw InputError("evaluation needs at least one feedback round");
  const auto tables = rollout_tables(model, corpus, rounds, source, execution);
  std::vector<SlotValues> base_pred, base_gold;
  std::vector<std::vector<SlotValues>> pred(rounds), gold(rounds);
  Evaluation ev;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    if (tables[i].empty()) {
      ++ev.skipped;
      continue;
    }
    ++ev.evaluated;
    const MultiRoundSample& s = corpus.samples[i];
    base_pred.push_back(tables[i][0].values(model.labels));
    base_gold.push_back(s.gold_tables[1]);
    for (std::size_t t = 1; t <= rounds; ++t) {
      pred[t - 1].push_back(tables[i][t].values(model.labels));
      gold[t - 1].push_back(s.gold_tables[t]);
    }
  }
  auto score = [](const std::vector<SlotValues>& p, const std::vector<SlotValues>& g) {
    return RoundMetrics{slot_f1(p, g), sentence_accuracy(p, g)};
  };
  ev.no_feedback = score(base_pred, base_gold);
  for (std::size_t t = 0; t < rounds; ++t) ev.rounds.push_back(score(pred[t], gold[t]));
  return ev;
}

// ---------------------------------------------------------------- training

std::string metrics_json(const EpochMetrics& m) {
  std::vector<double> f1, acc;
  for (const auto& r : m.evaluation.rounds) {
    f1.push_back(r.slots.f1);
    acc.push_back(r.sentence_accuracy);
  }
  const nlohmann::json j{{"epoch", m.epoch},
                         {"tagger_loss", m.tagger_loss},
                         {"expert_reward", m.expert_reward},
                         {"policy_reward", m.policy_reward},
                         {"reward_gap", m.expert_reward - m.policy_reward},
                         {"mean_log_prob", m.mean_log_prob},
                         {"mean_advantage", m.mean_advantage},
                         {"baseline", m.baseline},
                         {"no_feedback_f1", m.evaluation.no_feedback.slots.f1},
                         {"round_f1", f1},
                         {"round_sentence_accuracy", acc},
                         {"evaluated", m.evaluation.evaluated}};
  return j.dump();
}

std::string train_config_json(const TrainConfig& c) {
  const nlohmann::json j{{"learning_rate", c.learning_rate},
                         {"tagger_learning_rate", c.tagger_learning_rate},
                         {"reward_learning_rate", c.reward_learning_rate},
                         {"policy_learning_rate", c.policy_learning_rate},
                         {"batch_size", c.batch_size},
                         {"epochs", c.epochs},
                         {"tagger_epochs", c.tagger_epochs},
                         {"baseline_decay", c.baseline_decay},
                         {"seed", c.seed},
                         {"alpha", c.alpha},
                         {"lambda", c.lambda},
                         {"train_encoders", c.train_encoders},
                         {"reward_trains_feedback_encoder", c.reward_trains_feedback_encoder},
                         {"rollouts_per_sample", c.rollouts_per_sample},
                         {"freeze_tagger", c.freeze_tagger}};
  return j.dump();
}

TrainResult train(const MultiRoundCorpus& corpus, const ModelConfig& model_config, const TrainConfig& config,
                  const MultiRoundCorpus* eval_corpus, const std::function<void(const EpochMetrics&)>& on_epoch) {
  if (corpus.samples.empty()) throw InputError("training corpus is empty");
  return train(Model::create(model_config, vocab_of(corpus), labels_of(corpus), config.seed), corpus, config,
               eval_corpus, on_epoch);
}

namespace {

void require_finite(const Model& model, std::size_t epoch, std::size_t step, const char* phase) {
  if (model.all_finite()) return;
  std::string dump;
  const std::pair<const char*, const ParamSet*> groups[] = {{"query_encoder", &model.query_params},
                                                            {"feedback_encoder", &model.feedback_params},
                                                            {"tagger", &model.tagger_params},
                                                            {"policy", &model.policy_params},
                                                            {"reward", &model.reward_params}};
  for (const auto& [group, params] : groups)
    for (std::size_t i = 0; i < params->size(); ++i)
      if (!(*params)[i].all_finite()) dump += " " + params->name(i);
  throw NumericalError(std::string("non-finite parameters after ") + phase + " (epoch " + std::to_string(epoch) +
                       ", step " + std::to_string(step) + "):" + dump);
}

double or_default(double value, double fallback) { return value > 0.0 ? value : fallback; }

}  // namespace

TrainResult train(Model model, const MultiRoundCorpus& corpus, const TrainConfig& config,
                  const MultiRoundCorpus* eval_corpus, const std::function<void(const EpochMetrics&)>& on_epoch) {
  if (corpus.samples.empty()) throw InputError("training corpus is empty");
  if (config.batch_size == 0) throw InputError("batch size must be at least 1");
  if (config.rollouts_per_sample == 0) throw InputError("rollouts per sample must be at least 1");
  if (!(config.learning_rate > 0.0)) throw InputError("learning rate must be positive");
  TrainResult result;
  if (config.epochs == 0) {
    result.model = std::move(model);
    return result;
  }

  const Execution ex = config.execution;
  Adam tagger_opt(model.tagger_params, {or_default(config.tagger_learning_rate, config.learning_rate)});
  const auto tagger_data = tagger_training_set(corpus);
  for (std::size_t e = 0; e < config.tagger_epochs; ++e) {
    result.tagger_losses.push_back(
        tagger_epoch(model, tagger_opt, tagger_data, config.batch_size, mix_seed(config.seed, 11, e), ex));
    require_finite(model, 0, e, "tagger pretraining");
  }

  auto prepared = prepare_samples(model, corpus, ex);
  Adam reward_opt(model.reward_params, {or_default(config.reward_learning_rate, config.learning_rate)});
  PolicyOptimizers policy_opt(model, or_default(config.policy_learning_rate, config.learning_rate));
  Adam feedback_opt(model.feedback_params, {or_default(config.reward_learning_rate, config.learning_rate)});
  double baseline = 0.0;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochMetrics m;
    m.epoch = epoch;
    m.tagger_loss = result.tagger_losses.empty() ? 0.0 : result.tagger_losses.back();

    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < prepared.size(); ++i)
      if (prepared[i].rounds() > 0) order.push_back(i);
    Rng shuffler(mix_seed(config.seed, 13, epoch));
    shuffler.shuffle(order);

    double expert_total = 0.0, policy_total = 0.0, lp_total = 0.0, adv_total = 0.0;
    std::size_t round_total = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++step) {
      const std::size_t n = std::min(config.batch_size, order.size() - start);
      std::vector<const PreparedSample*> batch(n);
      for (std::size_t b = 0; b < n; ++b) batch[b] = &prepared[order[start + b]];
      // Episode j replays sample j mod n.
      const std::size_t episodes = n * config.rollouts_per_sample;
      std::vector<const PreparedSample*> episode_samples(episodes);
      std::vector<std::uint64_t> seeds(episodes);
      for (std::size_t j = 0; j < episodes; ++j) {
        episode_samples[j] = batch[j % n];
        seeds[j] = mix_seed(mix_seed(config.seed, 17, step), j);
      }

      std::vector<Trajectory> trajs(episodes);
      for_each_index(episodes, ex,
                     [&](std::size_t j) { trajs[j] = sample_trajectory(model, *episode_samples[j], seeds[j]); });
      std::vector<RewardExample> expert, policy;
      for (std::size_t j = 0; j < episodes; ++j)
        for (std::size_t t = 1; t <= episode_samples[j]->rounds(); ++t) {
          const PreparedSample& sample = *episode_samples[j];
          const Tensor& C = sample.candidates[t].matrix;
          const Tensor& c_f = trajs[j].feedback_features[t - 1];
          const auto& ids = sample.feedback_ids[t - 1];
          if (j < n) expert.push_back({mask_candidates(sample.expert[t], C), c_f, ids});
          policy.push_back({mask_candidates(trajs[j].masks[t - 1], C), c_f, ids});
        }
      const bool joint = config.reward_trains_feedback_encoder;
      const auto e = mean_reward_gradient(model, expert, joint, ex);
      const auto p = mean_reward_gradient(model, policy, joint, ex);
      reward_opt.ascend(model.reward_params, difference(e.reward, p.reward));
      if (joint) feedback_opt.ascend(model.feedback_params, difference(e.feedback_encoder, p.feedback_encoder));
      require_finite(model, epoch, step, "reward step");
      expert_total += e.mean_value * static_cast<double>(expert.size());
      policy_total += p.mean_value * static_cast<double>(expert.size());

      const PolicyGradient pg =
          batch_policy_gradient(model, episode_samples, seeds, baseline, config.train_encoders, ex);
      baseline = policy_grad_step(model, policy_opt, pg, baseline, config.baseline_decay, config.train_encoders,
                                  config.train_encoders && !joint);
      require_finite(model, epoch, step, "policy step");
      const double share = 1.0 / static_cast<double>(config.rollouts_per_sample);
      lp_total += pg.log_prob_sum * share;
      adv_total += pg.advantage_sum * share;
      round_total += expert.size();
    }

    if (!config.freeze_tagger) {
      m.tagger_loss = tagger_epoch(model, tagger_opt, tagger_data, config.batch_size,
                                   mix_seed(config.seed, 19, epoch), ex);
      require_finite(model, epoch, step, "tagger update");
      prepared = prepare_samples(model, corpus, ex);
    }

    if (round_total > 0) {
      const double inv = 1.0 / static_cast<double>(round_total);
      m.expert_reward = expert_total * inv;
      m.policy_reward = policy_total * inv;
      m.mean_log_prob = lp_total * inv;
      m.mean_advantage = adv_total * inv;
    }
    m.baseline = baseline;
    if (config.eval_rounds > 0)
      m.evaluation = evaluate(model, eval_corpus ? *eval_corpus : corpus, config.eval_rounds, MaskSource::Policy, ex);
    if (on_epoch) on_epoch(m);
    result.epochs.push_back(std::move(m));
  }

  nlohmann::json info{{"train", nlohmann::json::parse(train_config_json(config))},
                      {"baseline", baseline},
                      {"steps", step}};
  model.run_info = info.dump();
  result.model = std::move(model);
  result.baseline = baseline;
  return result;
}

}  // namespace mslu
