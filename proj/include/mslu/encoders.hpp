#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mslu/corpus.hpp"
#include "mslu/layers.hpp"

namespace mslu {

// Attention bi-LSTM sentence encoder: token embeddings -> bi-LSTM -> additive
// attention pooling -> affine projection to `output` dims. The query and the
// feedback encoders are two instances with separate parameters.
struct SentenceEncoder {
  std::size_t embedding = 0;  // vocab x embed
  BiLstm rnn;
  AttentionPool attention;
  Linear projection;
  std::size_t vocab_size = 0, embed = 0, hidden = 0, output = 0;

  static SentenceEncoder create(ParamSet& params, const std::string& prefix, std::size_t vocab_size,
                                std::size_t embed, std::size_t hidden, std::size_t attn, std::size_t output,
                                Rng& rng);

  Var encode(std::span<const Var> bound, std::span<const std::size_t> token_ids) const;
  Tensor encode(const ParamSet& params, std::span<const std::size_t> token_ids) const;
};

std::vector<std::size_t> token_ids(const Vocab& vocab, const std::vector<std::string>& tokens);

}  // namespace mslu
