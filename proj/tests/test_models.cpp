#include <doctest.h>

#include <cmath>
#include <numeric>

#include "mslu/adam.hpp"
#include "mslu/encoders.hpp"
#include "mslu/errors.hpp"
#include "mslu/gradient_suite.hpp"
#include "mslu/policy.hpp"
#include "mslu/reward.hpp"
#include "mslu/tagger.hpp"

using namespace mslu;

namespace {

using Vec = std::vector<double>;

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec matvec(const Tensor& w, const Vec& x) {
  Vec out(w.rows(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r)
    for (std::size_t c = 0; c < w.cols(); ++c) out[r] += w.at(r, c) * x[c];
  return out;
}

Vec affine(const Tensor& w, const Vec& x, const Tensor& b) {
  Vec out = matvec(w, x);
  for (std::size_t r = 0; r < out.size(); ++r) out[r] += b[r];
  return out;
}

// Straight-line reimplementation of the encoder, read from parameter names.
struct ReferenceEncoder {
  const ParamSet& p;
  std::string prefix;

  const Tensor& get(const std::string& name) const { return p[*p.find(prefix + "." + name)]; }

  std::vector<Vec> lstm(const std::vector<Vec>& xs, const std::string& dir, bool reverse) const {
    const Tensor &wx = get("rnn." + dir + ".wx"), &wh = get("rnn." + dir + ".wh"), &b = get("rnn." + dir + ".b");
    const std::size_t H = wh.cols();
    Vec h(H, 0.0), c(H, 0.0);
    std::vector<Vec> out(xs.size());
    for (std::size_t step = 0; step < xs.size(); ++step) {
      const std::size_t t = reverse ? xs.size() - 1 - step : step;
      Vec z = affine(wx, xs[t], b);
      const Vec zh = matvec(wh, h);
      for (std::size_t r = 0; r < z.size(); ++r) z[r] += zh[r];
      for (std::size_t u = 0; u < H; ++u) {
        c[u] = sigm(z[H + u]) * c[u] + sigm(z[u]) * std::tanh(z[3 * H + u]);
        h[u] = sigm(z[2 * H + u]) * std::tanh(c[u]);
      }
      out[t] = h;
    }
    return out;
  }

  Vec encode(const std::vector<std::size_t>& ids) const {
    const Tensor& emb = get("embedding");
    std::vector<Vec> xs;
    for (auto id : ids) xs.emplace_back(emb.row(id).begin(), emb.row(id).end());
    const auto f = lstm(xs, "fwd", false), b = lstm(xs, "bwd", true);
    std::vector<Vec> states;
    for (std::size_t t = 0; t < xs.size(); ++t) {
      Vec s = f[t];
      s.insert(s.end(), b[t].begin(), b[t].end());
      states.push_back(s);
    }
    const Tensor& v = get("attention.v");
    Vec scores;
    for (const auto& s : states) {
      Vec a = affine(get("attention.proj.w"), s, get("attention.proj.b"));
      double score = 0.0;
      for (std::size_t j = 0; j < a.size(); ++j) score += v[j] * std::tanh(a[j]);
      scores.push_back(score);
    }
    const double top = *std::max_element(scores.begin(), scores.end());
    double total = 0.0;
    for (auto& s : scores) total += (s = std::exp(s - top));
    Vec pooled(states[0].size(), 0.0);
    for (std::size_t t = 0; t < states.size(); ++t)
      for (std::size_t j = 0; j < pooled.size(); ++j) pooled[j] += scores[t] / total * states[t][j];
    return affine(get("out.w"), pooled, get("out.b"));
  }
};

struct EncoderFixture {
  ParamSet params;
  SentenceEncoder enc;
  explicit EncoderFixture(std::uint64_t seed, std::size_t vocab = 10, std::size_t m = 6) {
    Rng rng(seed);
    enc = SentenceEncoder::create(params, "enc", vocab, 5, 4, 3, m, rng);
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i].rank() == 1)
        for (auto& v : params[i].values()) v = rng.uniform(-0.3, 0.3);
  }
};

}  // namespace

// ---------------------------------------------------------------- encoders

TEST_CASE("encoder: all-zero parameters give a zero feature") {
  EncoderFixture f(3);
  f.params.zero();
  const std::vector<std::size_t> ids{1, 4, 2};
  const Tensor out = f.enc.encode(f.params, ids);
  CHECK(out.size() == 6);
  CHECK(out.all_zero());
}

TEST_CASE("encoder: output width is m for any input length") {
  EncoderFixture f(4, 10, 7);
  for (std::size_t n : {1u, 2u, 9u, 64u}) {
    std::vector<std::size_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = i % 10;
    const Tensor out = f.enc.encode(f.params, ids);
    CHECK(out.shape() == Shape{7});
    CHECK(out.all_finite());
  }
}

TEST_CASE("encoder: matches the straight-line reference") {
  EncoderFixture f(5);
  const std::vector<std::size_t> ids{3, 0, 7, 7, 1};
  const Tensor out = f.enc.encode(f.params, ids);
  const Vec ref = ReferenceEncoder{f.params, "enc"}.encode(ids);
  REQUIRE(ref.size() == out.size());
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(out[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("encoder: the same text encodes identically whenever it is seen") {
  EncoderFixture f(6);
  const std::vector<std::size_t> ids{2, 5, 8};
  const Tensor a = f.enc.encode(f.params, ids);
  const Tensor other = f.enc.encode(f.params, std::vector<std::size_t>{1, 1});
  const Tensor b = f.enc.encode(f.params, ids);
  CHECK(a == b);
  CHECK(a != other);
}

TEST_CASE("encoder: empty input and unknown ids are rejected") {
  EncoderFixture f(7);
  CHECK_THROWS_AS(f.enc.encode(f.params, std::vector<std::size_t>{}), InputError);
  CHECK_THROWS_AS(f.enc.encode(f.params, std::vector<std::size_t>{10}), InputError);
}

TEST_CASE("token_ids maps out-of-vocabulary words to the unknown row") {
  const Vocab vocab({"flights", "to", "boston"});
  CHECK(token_ids(vocab, {"flights", "to", "paris"}) == std::vector<std::size_t>{1, 2, 0});
}

// ---------------------------------------------------------------- tagger

namespace {

struct TaggerFixture {
  LabelSet labels{{"fromloc", "toloc"}};
  Vocab vocab{{"flights", "from", "boston", "to", "new", "york"}};
  ParamSet params;
  Tagger tagger;
  explicit TaggerFixture(std::uint64_t seed) {
    Rng rng(seed);
    tagger = Tagger::create(params, "tagger", vocab.size(), 6, 6, 4, labels.tag_count(), rng);
  }
};

}  // namespace

TEST_CASE("tagger: zero output layer gives uniform tag distributions") {
  TaggerFixture f(1);
  f.params[f.tagger.output.weight].fill(0.0);
  f.params[f.tagger.output.bias].fill(0.0);
  const auto dists = f.tagger.tag_distributions(f.params, std::vector<std::size_t>{1, 2, 3});
  REQUIRE(dists.size() == 3);
  for (const auto& d : dists)
    for (double p : d.values()) CHECK(p == doctest::Approx(1.0 / 5.0).epsilon(1e-15));
}

TEST_CASE("tagger: distributions are normalized") {
  TaggerFixture f(2);
  const auto dists = f.tagger.tag_distributions(f.params, std::vector<std::size_t>{1, 2, 3, 4, 5, 6, 0});
  for (const auto& d : dists) {
    const double total = std::accumulate(d.values().begin(), d.values().end(), 0.0);
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("tagger: overfitting one utterance for 500 steps reproduces its tags") {
  TaggerFixture f(3);
  const TaggedUtterance u{{"flights", "from", "boston", "to", "new", "york"},
                          {"O", "O", "B-fromloc", "O", "B-toloc", "I-toloc"}};
  const auto ids = token_ids(f.vocab, u.tokens);
  std::vector<std::size_t> gold;
  for (const auto& t : u.tags) gold.push_back(f.labels.tag_index(t));
  Adam adam(f.params, {.learning_rate = 1e-2});
  for (int step = 0; step < 500; ++step) {
    Tape tape;
    const auto bound = f.params.bind(tape, true);
    const Var loss = f.tagger.loss(bound, ids, gold);
    tape.backward(loss);
    adam.descend(f.params, f.params.grads(tape, bound));
  }
  CHECK(f.tagger.decode(f.params, ids, f.labels) == u.tags);
}

TEST_CASE("tagger: empty input is rejected") {
  TaggerFixture f(4);
  CHECK_THROWS_AS(f.tagger.tag_distributions(f.params, std::vector<std::size_t>{}), InputError);
}

TEST_CASE("repair_iob promotes orphan I tags") {
  CHECK(repair_iob({"I-toloc", "I-toloc", "O", "I-fromloc"}) ==
        std::vector<std::string>{"B-toloc", "I-toloc", "O", "B-fromloc"});
}

TEST_CASE("slot candidates: means, zero rows and provenance") {
  const LabelSet labels({"a", "b", "c"});
  const Tensor emb = Tensor::matrix(4, 2, {0, 0, 1, 0, 0, 1, 3, 5});
  const TaggedUtterance u{{"w1", "w2", "w3", "w1"}, {"B-b", "I-b", "O", "B-a"}};
  const std::vector<std::size_t> ids{1, 2, 3, 1};
  const auto c = build_slot_candidates(u, ids, emb, labels);
  CHECK(c.matrix.shape() == Shape{4, 2});
  CHECK(c.matrix.at(2, 0) == 0.5);
  CHECK(c.matrix.at(2, 1) == 0.5);
  CHECK(c.matrix.at(1, 0) == 1.0);  // single token: its embedding
  CHECK(c.matrix.at(1, 1) == 0.0);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(c.matrix.at(0, j) == 0.0);  // O
    CHECK(c.matrix.at(3, j) == 0.0);  // c absent
  }
  CHECK(c.values[2] == std::optional<std::string>("w1 w2"));
  CHECK(c.values[1] == std::optional<std::string>("w1"));
  CHECK(!c.values[3].has_value());
  CHECK(c.presence() == std::vector<int>{0, 1, 1, 0});
}

TEST_CASE("slot candidates: pooled spans use the last span's text") {
  const LabelSet labels({"a"});
  const Tensor emb = Tensor::matrix(3, 1, {0, 2, 4});
  const TaggedUtterance u{{"x", "y"}, {"B-a", "B-a"}};
  const auto c = build_slot_candidates(u, std::vector<std::size_t>{1, 2}, emb, labels);
  CHECK(c.matrix.at(1, 0) == 3.0);
  CHECK(c.values[1] == std::optional<std::string>("y"));
}

TEST_CASE("slot candidates: invalid IOB is rejected") {
  const LabelSet labels({"a"});
  const Tensor emb(Shape{2, 1}, 1.0);
  CHECK_THROWS_AS(build_slot_candidates({{"x"}, {"I-a"}}, std::vector<std::size_t>{1}, emb, labels),
                  ValidationError);
}

TEST_CASE("property: candidate rows are zero exactly when no token carries the label") {
  const LabelSet labels({"a", "b", "c", "d"});
  Rng rng(77);
  Tensor emb(Shape{6, 3});
  for (auto& v : emb.values()) v = rng.uniform(0.1, 1.0);  // strictly positive, so means never cancel
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.index(8);
    TaggedUtterance u;
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < n; ++i) {
      u.tokens.push_back("w");
      ids.push_back(rng.index(6));
      const std::size_t tag = rng.index(labels.tag_count());
      u.tags.push_back(labels.tag_name(tag));
    }
    u.tags = repair_iob(u.tags);
    const auto c = build_slot_candidates(u, ids, emb, labels);
    CHECK(c.matrix.shape() == Shape{5, 3});
    for (std::size_t l = 0; l < labels.size(); ++l) {
      bool tagged = false;
      for (const auto& t : u.tags) tagged |= l > 0 && t != "O" && t.substr(2) == labels.label(l);
      bool zero = true;
      for (double v : c.matrix.row(l)) zero &= v == 0.0;
      CHECK(zero == !tagged);
    }
  }
}

TEST_CASE("property: permuting tokens inside a span leaves its row unchanged") {
  const LabelSet labels({"a"});
  const Tensor emb = Tensor::matrix(4, 1, {0.0, 0.1, 0.7, 0.3});
  const TaggedUtterance u{{"x", "y", "z"}, {"B-a", "I-a", "I-a"}};
  const auto a = build_slot_candidates(u, std::vector<std::size_t>{1, 2, 3}, emb, labels);
  const auto b = build_slot_candidates(u, std::vector<std::size_t>{3, 1, 2}, emb, labels);
  CHECK(a.matrix.at(1, 0) == doctest::Approx(b.matrix.at(1, 0)).epsilon(1e-15));
}

// ---------------------------------------------------------------- policy

namespace {

struct PolicyFixture {
  ParamSet params;
  PolicyModel policy;
  PolicyFixture(std::size_t m, std::size_t k, std::uint64_t seed) {
    Rng rng(seed);
    policy = PolicyModel::create(params, "policy", m, k, 4, 5, rng);
  }
};

Tensor filled(std::size_t n, double v) { return Tensor(Shape{n}, v); }

}  // namespace

TEST_CASE("policy: zero parameters give p = 0.5 and keep everything greedily") {
  PolicyFixture f(4, 3, 1);
  f.params.zero();
  const auto d = policy_step(f.policy, f.params, filled(4, 0.3), filled(4, -0.2), f.policy.initial_state({1, 0, 1}),
                             MaskMode::Greedy, 0);
  for (double p : d.state.p.values()) CHECK(p == 0.5);
  CHECK(d.state.s == Mask{1, 1, 1});
  CHECK(d.log_prob == doctest::Approx(3 * std::log(0.5)).epsilon(1e-15));
}

TEST_CASE("policy: hand-set logits ln 3 and -ln 3") {
  PolicyFixture f(2, 2, 2);
  f.params.zero();
  f.params[f.policy.head.bias] = Tensor::vector({std::log(3.0), -std::log(3.0)});
  const auto d =
      policy_step(f.policy, f.params, filled(2, 1), filled(2, 1), f.policy.initial_state({1, 1}), MaskMode::Greedy, 0);
  CHECK(d.state.p[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(d.state.p[1] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(d.state.s == Mask{1, 0});
  CHECK(d.log_prob == doctest::Approx(2 * std::log(0.75)).epsilon(1e-14));
}

TEST_CASE("policy: sampling is a pure function of its inputs and seed") {
  PolicyFixture f(4, 6, 3);
  const MaskState prev = f.policy.initial_state({1, 1, 0, 0, 1, 0});
  const auto a = policy_step(f.policy, f.params, filled(4, 0.5), filled(4, 0.1), prev, MaskMode::Sample, 42);
  const auto b = policy_step(f.policy, f.params, filled(4, 0.5), filled(4, 0.1), prev, MaskMode::Sample, 42);
  CHECK(a.state == b.state);
  CHECK(a.log_prob == b.log_prob);
  std::vector<double> logits;
  for (double p : a.state.p.values()) logits.push_back(std::log(p / (1 - p)));
  CHECK(a.log_prob == doctest::Approx(mask_log_prob(Tensor::vector(logits), a.state.s)).epsilon(1e-12));
}

TEST_CASE("policy: carried state has the expected shapes and probabilities in (0, 1)") {
  PolicyFixture f(4, 6, 4);
  MaskState s = f.policy.initial_state({1, 0, 1, 0, 1, 0});
  CHECK(s.h.all_zero());
  for (int round = 0; round < 4; ++round) {
    s = policy_step(f.policy, f.params, filled(4, 0.2), filled(4, 0.3 * round), s, MaskMode::Sample, round).state;
    CHECK(s.s.size() == 6);
    CHECK(s.h.size() == 5);
    for (double p : s.p.values()) {
      CHECK(p > 0.0);
      CHECK(p < 1.0);
    }
  }
}

TEST_CASE("policy: dimension errors") {
  PolicyFixture f(4, 3, 5);
  CHECK_THROWS_AS(policy_step(f.policy, f.params, filled(3, 0), filled(4, 0), f.policy.initial_state({1, 1, 1}),
                              MaskMode::Greedy, 0),
                  DimensionError);
  CHECK_THROWS_AS(f.policy.initial_state({1, 1}), DimensionError);
  CHECK_THROWS_AS(mask_candidates({1, 0}, Tensor(Shape{3, 2})), DimensionError);
}

TEST_CASE("property: the greedy mask beats every single-bit flip") {
  Rng rng(9);
  for (int trial = 0; trial < 500; ++trial) {
    Tensor logits(Shape{6});
    for (auto& z : logits.values()) z = rng.uniform(-4.0, 4.0);
    Tensor p(Shape{6});
    for (std::size_t i = 0; i < 6; ++i) p[i] = sigmoid(logits[i]);
    const Mask g = greedy_mask(p);
    const double best = mask_log_prob(logits, g);
    for (std::size_t i = 0; i < 6; ++i) {
      Mask flipped = g;
      flipped[i] ^= 1;
      CHECK(best >= mask_log_prob(logits, flipped));
    }
  }
}

TEST_CASE("mask_candidates examples") {
  const Tensor C = Tensor::matrix(2, 2, {1, 2, 3, 4});
  CHECK(mask_candidates({1, 0}, C) == Tensor::matrix(2, 2, {1, 2, 0, 0}));
  CHECK(mask_candidates({1, 1}, C) == C);
  CHECK(mask_candidates({0, 0}, C).all_zero());
}

TEST_CASE("mask log-probability on the tape matches the tensor version") {
  Tape tape;
  const Tensor z = Tensor::vector({0.3, -1.2, 2.0});
  const Mask s{1, 0, 0};
  CHECK(mask_log_prob(tape.constant(z), s).scalar() == doctest::Approx(mask_log_prob(z, s)).epsilon(1e-15));
}

// ---------------------------------------------------------------- reward

namespace {

struct RewardFixture {
  ParamSet params;
  RewardModel reward;
  RewardFixture(std::size_t k, std::size_t m, std::uint64_t seed) {
    Rng rng(seed);
    reward = RewardModel::create(params, "reward", k, m, 3, rng);
  }
};

}  // namespace

TEST_CASE("reward: zero parameters give zero") {
  RewardFixture f(3, 4, 1);
  f.params.zero();
  Rng rng(2);
  Tensor M(Shape{3, 4});
  for (auto& v : M.values()) v = rng.uniform(-1, 1);
  CHECK(f.reward.reward(f.params, M, filled(4, 0.7)) == 0.0);
}

TEST_CASE("reward: pre-activation of exactly 1 gives 0.5") {
  RewardFixture f(2, 2, 3);
  f.params.zero();
  f.params[f.reward.bias] = Tensor::vector({1.0});
  CHECK(f.reward.reward(f.params, Tensor(Shape{2, 2}), filled(2, 0)) == 0.5);
}

TEST_CASE("reward: k = 2, m = 2 hand trace") {
  // Zero LSTM weights give h = 0, so f(M) = (0.1, 0.1) from the row-score bias.
  // M c_f = (1*0.5 - 2, 3*0.5 - 4) = (-1.5, -2.5); W (f + M c_f) + b
  // = 1*(-1.4) - 0.5*(-2.4) + 0.7 = 0.5; softsign(0.5) = 1/3.
  RewardFixture f(2, 2, 4);
  f.params.zero();
  f.params[f.reward.row_score.bias] = Tensor::vector({0.1});
  f.params[f.reward.weight] = Tensor::matrix(1, 2, {1.0, -0.5});
  f.params[f.reward.bias] = Tensor::vector({0.7});
  const double r = f.reward.reward(f.params, Tensor::matrix(2, 2, {1, 2, 3, 4}), Tensor::vector({0.5, -1.0}));
  CHECK(r == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("reward: output stays inside (-1, 1)") {
  RewardFixture f(4, 3, 5);
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor M(Shape{4, 3});
    for (auto& v : M.values()) v = rng.uniform(-50, 50);
    const double r = f.reward.reward(f.params, M, filled(3, rng.uniform(-50, 50)));
    CHECK(r > -1.0);
    CHECK(r < 1.0);
  }
}

TEST_CASE("reward: shape errors") {
  RewardFixture f(4, 3, 7);
  CHECK_THROWS_AS(f.reward.reward(f.params, Tensor(Shape{3, 3}), filled(3, 0)), DimensionError);
  CHECK_THROWS_AS(f.reward.reward(f.params, Tensor(Shape{4, 3}), filled(2, 0)), DimensionError);
}

TEST_CASE("boltzmann examples") {
  CHECK(boltzmann(std::vector<double>{4.2}) == std::vector<double>{1.0});
  for (double p : boltzmann(std::vector<double>{0.3, 0.3, 0.3})) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const auto p = boltzmann(std::vector<double>{std::log(2.0), 0.0});
  CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(boltzmann(std::vector<double>{}), InputError);
  CHECK_THROWS_AS(boltzmann(std::vector<double>{1.0, NAN}), NumericalError);
}

TEST_CASE("property: boltzmann normalizes, preserves order and ignores shifts") {
  Rng rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> r(1 + rng.index(10));
    for (auto& x : r) x = rng.uniform(-50, 50);
    const auto p = boltzmann(r);
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-12);
    const double c = rng.uniform(-50, 50);
    std::vector<double> shifted = r;
    for (auto& x : shifted) x += c;
    const auto q = boltzmann(shifted);
    for (std::size_t i = 0; i < r.size(); ++i) {
      CHECK(std::abs(p[i] - q[i]) < 1e-12);
      for (std::size_t j = 0; j < r.size(); ++j)
        if (r[i] > r[j]) CHECK(p[i] >= p[j]);
    }
  }
}

// ---------------------------------------------------------------- gradients

TEST_CASE("gradient suite passes for every component") {
  for (std::uint64_t seed : {1u, 2u}) {
    GradientSuiteConfig config;
    config.seed = seed;
    for (const auto& e : run_gradient_suite(config)) {
      INFO(e.component << " worst " << e.report.worst_parameter << "[" << e.report.worst_index << "] "
                       << e.report.max_relative_error);
      CHECK(e.passed);
      CHECK(e.report.coordinates > 0);
    }
  }
}
