#include "mslu/encoders.hpp"

#include "mslu/errors.hpp"

namespace mslu {

SentenceEncoder SentenceEncoder::create(ParamSet& params, const std::string& prefix, std::size_t vocab_size,
                                        std::size_t embed, std::size_t hidden, std::size_t attn,
                                        std::size_t output, Rng& rng) {
  if (vocab_size == 0 || embed == 0 || hidden == 0 || attn == 0 || output == 0)
    throw InputError("encoder '" + prefix + "' needs positive dimensions");
  SentenceEncoder enc;
  enc.vocab_size = vocab_size;
  enc.embed = embed;
  enc.hidden = hidden;
  enc.output = output;
  enc.embedding = params.add(prefix + ".embedding", xavier_uniform(vocab_size, embed, rng));
  enc.rnn = BiLstm::create(params, prefix + ".rnn", embed, hidden, rng);
  enc.attention = AttentionPool::create(params, prefix + ".attention", 2 * hidden, attn, rng);
  enc.projection = Linear::create(params, prefix + ".out", 2 * hidden, output, rng);
  return enc;
}

Var SentenceEncoder::encode(std::span<const Var> bound, std::span<const std::size_t> ids) const {
  if (ids.empty()) throw InputError("cannot encode an empty token sequence");
  std::vector<Var> inputs;
  inputs.reserve(ids.size());
  for (std::size_t id : ids) {
    if (id >= vocab_size) throw InputError("token id " + std::to_string(id) + " outside the vocabulary");
    inputs.push_back(ad::row(bound[embedding], id));
  }
  const auto states = rnn.run(bound, inputs);
  return projection.apply(bound, attention.apply(bound, states).pooled);
}

Tensor SentenceEncoder::encode(const ParamSet& params, std::span<const std::size_t> ids) const {
  Tape tape;
  const auto bound = params.bind(tape, false);
  return encode(bound, ids).value();
}

std::vector<std::size_t> token_ids(const Vocab& vocab, const std::vector<std::string>& tokens) {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id(t));
  return ids;
}

}  // namespace mslu
