#include "mslu/tagger.hpp"

#include "mslu/errors.hpp"

namespace mslu {

Tagger Tagger::create(ParamSet& params, const std::string& prefix, std::size_t vocab_size, std::size_t embed,
                      std::size_t hidden, std::size_t attn, std::size_t tag_count, Rng& rng) {
  if (vocab_size == 0 || embed == 0 || hidden == 0 || attn == 0 || tag_count == 0)
    throw InputError("tagger '" + prefix + "' needs positive dimensions");
  Tagger t;
  t.vocab_size = vocab_size;
  t.embed = embed;
  t.hidden = hidden;
  t.tags = tag_count;
  t.embedding = params.add(prefix + ".embedding", xavier_uniform(vocab_size, embed, rng));
  t.rnn = BiLstm::create(params, prefix + ".rnn", embed, hidden, rng);
  t.attention = AttentionPool::create(params, prefix + ".attention", 2 * hidden, attn, rng);
  t.output = Linear::create(params, prefix + ".out", 4 * hidden, tag_count, rng);
  return t;
}

std::vector<Var> Tagger::logits(std::span<const Var> bound, std::span<const std::size_t> ids) const {
  if (ids.empty()) throw InputError("cannot tag an empty token sequence");
  std::vector<Var> inputs;
  inputs.reserve(ids.size());
  for (std::size_t id : ids) {
    if (id >= vocab_size) throw InputError("token id " + std::to_string(id) + " outside the vocabulary");
    inputs.push_back(ad::row(bound[embedding], id));
  }
  const auto states = rnn.run(bound, inputs);
  const Var context = attention.apply(bound, states).pooled;
  std::vector<Var> out;
  out.reserve(states.size());
  for (const Var& h : states) out.push_back(output.apply(bound, ad::concat({h, context})));
  return out;
}

Var Tagger::loss(std::span<const Var> bound, std::span<const std::size_t> ids,
                 std::span<const std::size_t> gold) const {
  if (gold.size() != ids.size())
    throw DimensionError("tagger loss: " + std::to_string(ids.size()) + " tokens, " + std::to_string(gold.size()) +
                         " gold tags");
  const auto scores = logits(bound, ids);
  std::vector<Var> picked;
  picked.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) picked.push_back(ad::element(ad::log_softmax(scores[i]), gold[i]));
  return ad::scale(ad::sum(ad::concat(picked)), -1.0 / static_cast<double>(picked.size()));
}

std::vector<Tensor> Tagger::tag_distributions(const ParamSet& params, std::span<const std::size_t> ids) const {
  Tape tape;
  const auto bound = params.bind(tape, false);
  std::vector<Tensor> out;
  for (const Var& s : logits(bound, ids)) out.push_back(ad::softmax(s).value());
  return out;
}

std::vector<std::string> Tagger::decode(const ParamSet& params, std::span<const std::size_t> ids,
                                        const LabelSet& labels) const {
  if (labels.tag_count() != tags)
    throw DimensionError("tagger has " + std::to_string(tags) + " tags, label set " +
                         std::to_string(labels.tag_count()));
  Tape tape;
  const auto bound = params.bind(tape, false);
  std::vector<std::string> out;
  for (const Var& s : logits(bound, ids)) {
    const Tensor& v = s.value();
    std::size_t best = 0;
    for (std::size_t j = 1; j < v.size(); ++j)
      if (v[j] > v[best]) best = j;
    out.push_back(labels.tag_name(best));
  }
  return repair_iob(std::move(out));
}

std::vector<std::string> repair_iob(std::vector<std::string> tags) {
  for (std::size_t i : validate_iob(tags)) tags[i][0] = 'B';
  return tags;
}

std::vector<int> SlotCandidates::presence() const {
  std::vector<int> out(values.size(), 0);
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i].has_value();
  return out;
}

SlotCandidates build_slot_candidates(const TaggedUtterance& tagged, std::span<const std::size_t> ids,
                                     const Tensor& embeddings, const LabelSet& labels) {
  if (tagged.tokens.size() != tagged.tags.size() || ids.size() != tagged.tokens.size())
    throw DimensionError("candidate builder: " + std::to_string(tagged.tokens.size()) + " tokens, " +
                         std::to_string(tagged.tags.size()) + " tags, " + std::to_string(ids.size()) + " ids");
  const auto bad = validate_iob(tagged.tags, &labels);
  if (!bad.empty()) throw ValidationError("IOB violation at token " + std::to_string(bad.front()));
  if (embeddings.rank() != 2) throw DimensionError("embeddings must be a matrix");

  const std::size_t k = labels.size(), m = embeddings.cols();
  SlotCandidates out;
  out.matrix = Tensor(Shape{k, m}, 0.0);
  out.values.assign(k, std::nullopt);
  out.spans.assign(k, {});
  std::vector<std::size_t> counts(k, 0);
  for (const auto& span : extract_spans(tagged.tags)) {
    const std::size_t label = labels.index(span.label);
    for (std::size_t i = span.begin; i < span.end; ++i) {
      if (ids[i] >= embeddings.rows()) throw InputError("token id outside the embedding table");
      const auto e = embeddings.row(ids[i]);
      auto row = out.matrix.row(label);
      for (std::size_t j = 0; j < m; ++j) row[j] += e[j];
      ++counts[label];
    }
    out.values[label] = span_text(tagged.tokens, span);
    out.spans[label].push_back(span);
  }
  for (std::size_t l = 0; l < k; ++l)
    if (counts[l] > 1)
      for (auto& x : out.matrix.row(l)) x /= static_cast<double>(counts[l]);
  return out;
}

}  // namespace mslu
