#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mslu/adam.hpp"
#include "mslu/kernels.hpp"
#include "mslu/model.hpp"
#include "mslu/pipeline.hpp"

namespace mslu {

struct TrainConfig {
  double learning_rate = 1e-5;
  // Per-group overrides; 0 means "use learning_rate".
  double tagger_learning_rate = 0.0;
  double reward_learning_rate = 0.0;
  double policy_learning_rate = 0.0;
  std::size_t batch_size = 16;
  // Sampled trajectories per sample in each policy step; all of them enter
  // the policy-side mean of the reward step too.
  std::size_t rollouts_per_sample = 1;
  std::size_t epochs = 30;         // adversarial epochs; 0 skips training entirely
  std::size_t tagger_epochs = 10;  // supervised tagger epochs before the adversarial phase
  double baseline_decay = 0.99;
  std::uint64_t seed = 1;
  // Named in the hyperparameter list but not used by any update rule.
  double alpha = 0.5;
  double lambda = 1.0;
  bool train_encoders = true;  // query/feedback encoders follow the policy update
  // The reward step also trains the feedback encoder, since c_f enters R
  // through M c_f; the policy step then leaves that encoder alone.
  bool reward_trains_feedback_encoder = true;
  bool freeze_tagger = true;   // false: one more supervised tagger pass per adversarial epoch
  std::size_t eval_rounds = 1;
  Execution execution = Execution::Serial;
};

// Expert mask of a round: the labels the round introduced or changed (all
// gold labels at round 0).
Mask expert_mask(const MultiRoundSample& sample, std::size_t round, const LabelSet& labels);

// Everything about a sample the adversarial phase needs while the tagger is
// fixed.
struct PreparedSample {
  std::vector<std::size_t> query_ids;
  std::vector<std::vector<std::size_t>> feedback_ids;  // [t - 1] for round t
  std::vector<SlotCandidates> candidates;              // [t], t = 0..rounds
  std::vector<Mask> expert;                            // [t]

  std::size_t rounds() const noexcept { return feedback_ids.size(); }
};

std::vector<PreparedSample> prepare_samples(const Model& model, const MultiRoundCorpus& corpus,
                                            Execution execution = Execution::Serial);

// ---------------------------------------------------------------- tagger

std::vector<TaggedUtterance> tagger_training_set(const MultiRoundCorpus& corpus);
// One epoch of mean cross-entropy descent; returns the mean loss.
double tagger_epoch(Model& model, Adam& optimizer, const std::vector<TaggedUtterance>& data, std::size_t batch_size,
                    std::uint64_t seed, Execution execution);

// ---------------------------------------------------------------- reward step

struct RewardExample {
  Tensor masked;
  Tensor c_f;
  // When set, c_f is recomputed from these ids on the tape so the feedback
  // encoder receives a gradient as well.
  std::vector<std::size_t> feedback_ids;
};

struct RewardGradient {
  std::vector<Tensor> reward;
  std::vector<Tensor> feedback_encoder;  // empty unless requested
  double mean_value = 0.0;
};

RewardGradient mean_reward_gradient(const Model& model, std::span<const RewardExample> batch,
                                    bool with_feedback_encoder, Execution execution = Execution::Serial);

// Batch mean of dR/dtheta over the examples.
std::vector<Tensor> mean_reward_gradient(const Model& model, std::span<const RewardExample> batch,
                                         Execution execution = Execution::Serial);
// mean dR(expert) - mean dR(policy), each mean computed on its own.
std::vector<Tensor> reward_objective_gradient(const Model& model, std::span<const RewardExample> expert,
                                              std::span<const RewardExample> policy,
                                              Execution execution = Execution::Serial);
// Gradient ascent on theta with the objective gradient above.
void reward_grad_step(Model& model, Adam& optimizer, std::span<const RewardExample> expert,
                      std::span<const RewardExample> policy, Execution execution = Execution::Serial);

// ---------------------------------------------------------------- policy step

// One rollout of the policy over a prepared sample, masks drawn from a
// generator seeded with `seed`.
struct Trajectory {
  std::vector<Mask> masks;         // [t - 1] for round t
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<Tensor> feedback_features;
};

Trajectory sample_trajectory(const Model& model, const PreparedSample& sample, std::uint64_t seed);

// Gradients of sum_t A_t log pi(s_t), A_t = R_t - log pi(s_t) - b, for the
// trajectory drawn with `seed`.
struct PolicyGradient {
  std::vector<Tensor> policy, query_encoder, feedback_encoder;
  double reward_sum = 0.0, log_prob_sum = 0.0, advantage_sum = 0.0;
  std::size_t rounds = 0;
};

PolicyGradient trajectory_policy_gradient(const Model& model, const PreparedSample& sample, std::uint64_t seed,
                                          double baseline, bool train_encoders);

// Batch mean over samples; seeds[i] drives sample i.
PolicyGradient batch_policy_gradient(const Model& model, std::span<const PreparedSample* const> batch,
                                     std::span<const std::uint64_t> seeds, double baseline, bool train_encoders,
                                     Execution execution = Execution::Serial);

struct PolicyOptimizers {
  Adam policy, query_encoder, feedback_encoder;
  explicit PolicyOptimizers(const Model& model, double learning_rate);
};

// Ascent step on beta (and the encoders when requested); returns the new
// baseline b' = decay * b + (1 - decay) * mean(R - log pi).
double policy_grad_step(Model& model, PolicyOptimizers& optimizers, const PolicyGradient& gradient, double baseline,
                        double decay, bool update_query_encoder, bool update_feedback_encoder);

// Single-round score-function estimators, used to validate the update above.
using AdvantageFn = std::function<double(const Mask&, double log_prob)>;

// A(s) * d log pi(s) / d beta for one given mask.
std::vector<Tensor> score_function_gradient(const PolicyModel& policy, const ParamSet& params, const Tensor& c_q,
                                            const Tensor& c_f, const MaskState& prev, const Mask& mask,
                                            double advantage);

// sum over all 2^k masks of pi(s) A(s) d log pi(s) / d beta, accumulated in
// mask pairs so that a constant advantage yields exactly zero.
std::vector<Tensor> exact_policy_gradient(const PolicyModel& policy, const ParamSet& params, const Tensor& c_q,
                                          const Tensor& c_f, const MaskState& prev, const AdvantageFn& advantage);

struct GradientEstimate {
  std::vector<Tensor> mean;
  std::vector<Tensor> standard_error;
};

GradientEstimate monte_carlo_policy_gradient(const PolicyModel& policy, const ParamSet& params, const Tensor& c_q,
                                             const Tensor& c_f, const MaskState& prev, const AdvantageFn& advantage,
                                             std::size_t samples, std::uint64_t seed,
                                             Execution execution = Execution::Serial);

// ---------------------------------------------------------------- evaluation

struct RoundMetrics {
  SlotScores slots;
  double sentence_accuracy = 0.0;
};

struct Evaluation {
  RoundMetrics no_feedback;          // round-0 table scored against the round-1 gold
  std::vector<RoundMetrics> rounds;  // [t - 1]: table after round t vs gold t
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  // samples with fewer rounds than requested
};

// Tables after rounds 0..rounds for every sample with enough rounds (others
// get an empty list).
std::vector<std::vector<SlotFillingTable>> rollout_tables(const Model& model, const MultiRoundCorpus& corpus,
                                                          std::size_t rounds, MaskSource source = MaskSource::Policy,
                                                          Execution execution = Execution::Serial);

Evaluation evaluate(const Model& model, const MultiRoundCorpus& corpus, std::size_t rounds,
                    MaskSource source = MaskSource::Policy, Execution execution = Execution::Serial);

// ---------------------------------------------------------------- training

struct EpochMetrics {
  std::size_t epoch = 0;
  double tagger_loss = 0.0;
  double expert_reward = 0.0;  // mean R over expert masks
  double policy_reward = 0.0;  // mean R over sampled masks
  double mean_log_prob = 0.0;
  double mean_advantage = 0.0;
  double baseline = 0.0;
  Evaluation evaluation;
};

std::string metrics_json(const EpochMetrics& metrics);

struct TrainResult {
  Model model;
  double baseline = 0.0;
  std::vector<double> tagger_losses;
  std::vector<EpochMetrics> epochs;
};

// Builds the vocabulary and label set from the corpus, pretrains the tagger,
// then alternates one reward step and one policy step per batch.
TrainResult train(const MultiRoundCorpus& corpus, const ModelConfig& model_config, const TrainConfig& config,
                  const MultiRoundCorpus* eval_corpus = nullptr,
                  const std::function<void(const EpochMetrics&)>& on_epoch = {});

// Same, starting from an existing model (vocabulary and labels kept).
TrainResult train(Model model, const MultiRoundCorpus& corpus, const TrainConfig& config,
                  const MultiRoundCorpus* eval_corpus = nullptr,
                  const std::function<void(const EpochMetrics&)>& on_epoch = {});

std::string train_config_json(const TrainConfig& config);

}  // namespace mslu
