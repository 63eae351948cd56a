// Serial reference vs OpenMP variants of the data-parallel kernels. Both
// produce identical bits; only the wall time differs.
#include <benchmark/benchmark.h>

#include "mslu/synthetic.hpp"
#include "mslu/trainer.hpp"

using namespace mslu;

namespace {

Execution execution_of(const benchmark::State& state) { return state.range(0) ? Execution::Parallel : Execution::Serial; }

const MultiRoundCorpus& corpus() {
  static const MultiRoundCorpus c = [] {
    SyntheticCorpusOptions o;
    o.samples = 64;
    o.rounds = 4;
    return synthetic_corpus(o);
  }();
  return c;
}

const Model& model() {
  static const Model m = Model::create(desk_model_config(), vocab_of(corpus()), labels_of(corpus()), 1);
  return m;
}

void label(benchmark::State& state) { state.SetLabel(state.range(0) ? "parallel" : "serial"); }

void BM_TaggerEpoch(benchmark::State& state) {
  const auto data = tagger_training_set(corpus());
  for (auto _ : state) {
    Model m = model();
    Adam opt(m.tagger_params, {1e-2});
    benchmark::DoNotOptimize(tagger_epoch(m, opt, data, 32, 1, execution_of(state)));
  }
  label(state);
}

void BM_PrepareSamples(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(prepare_samples(model(), corpus(), execution_of(state)));
  label(state);
}

void BM_PolicyGradientBatch(benchmark::State& state) {
  static const auto prepared = prepare_samples(model(), corpus());
  std::vector<const PreparedSample*> batch;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    batch.push_back(&prepared[i]);
    seeds.push_back(i);
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(batch_policy_gradient(model(), batch, seeds, 0.0, true, execution_of(state)));
  label(state);
}

void BM_RewardGradient(benchmark::State& state) {
  static const auto prepared = prepare_samples(model(), corpus());
  std::vector<RewardExample> batch;
  for (const auto& p : prepared)
    for (std::size_t t = 1; t <= p.rounds(); ++t)
      batch.push_back({mask_candidates(p.expert[t], p.candidates[t].matrix), Tensor(Shape{model().m()}), p.feedback_ids[t - 1]});
  for (auto _ : state) benchmark::DoNotOptimize(mean_reward_gradient(model(), batch, true, execution_of(state)));
  label(state);
}

void BM_EvaluateRollouts(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(model(), corpus(), 4, MaskSource::Policy, execution_of(state)));
  label(state);
}

void BM_MonteCarloPolicyGradient(benchmark::State& state) {
  ParamSet params;
  Rng rng(3);
  const PolicyModel policy = PolicyModel::create(params, "policy", 3, 3, 4, 3, rng);
  const Tensor c(Shape{3}, 0.5);
  const MaskState prev = policy.initial_state(Mask{1, 1, 0});
  const AdvantageFn adv = [](const Mask& s, double lp) { return s[0] - lp; };
  for (auto _ : state)
    benchmark::DoNotOptimize(monte_carlo_policy_gradient(policy, params, c, c, prev, adv, 20000, 1, execution_of(state)));
  label(state);
}

}  // namespace

BENCHMARK(BM_TaggerEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PrepareSamples)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PolicyGradientBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RewardGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateRollouts)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MonteCarloPolicyGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
