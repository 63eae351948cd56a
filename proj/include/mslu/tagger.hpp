#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mslu/corpus.hpp"
#include "mslu/layers.hpp"

namespace mslu {

// Attention bi-LSTM tagger. Each position is scored from its own bi-LSTM
// state concatenated with an attention summary of the whole sequence.
struct Tagger {
  std::size_t embedding = 0;  // vocab x embed; also the source of candidate rows
  BiLstm rnn;
  AttentionPool attention;
  Linear output;  // 4H -> tag count
  std::size_t vocab_size = 0, embed = 0, hidden = 0, tags = 0;

  static Tagger create(ParamSet& params, const std::string& prefix, std::size_t vocab_size, std::size_t embed,
                       std::size_t hidden, std::size_t attn, std::size_t tag_count, Rng& rng);

  // Unnormalized tag scores, one vector per token.
  std::vector<Var> logits(std::span<const Var> bound, std::span<const std::size_t> ids) const;
  // Mean per-token cross-entropy against gold tag indices.
  Var loss(std::span<const Var> bound, std::span<const std::size_t> ids, std::span<const std::size_t> gold) const;

  std::vector<Tensor> tag_distributions(const ParamSet& params, std::span<const std::size_t> ids) const;
  // Argmax tags, repaired into a valid IOB sequence.
  std::vector<std::string> decode(const ParamSet& params, std::span<const std::size_t> ids,
                                  const LabelSet& labels) const;
};

// Turns every I-X that lacks a B-X/I-X predecessor into B-X.
std::vector<std::string> repair_iob(std::vector<std::string> tags);

// Candidate matrix plus, per label, where its value came from.
struct SlotCandidates {
  Tensor matrix;  // k x m; row i = mean embedding of the tokens tagged l_i
  std::vector<std::optional<std::string>> values;  // text of the last span, per label
  std::vector<std::vector<SlotSpan>> spans;

  std::size_t labels() const noexcept { return values.size(); }
  // Labels with at least one tagged token, as a 0/1 vector.
  std::vector<int> presence() const;
};

// Row 0 (O) is always zero. All spans of a label are pooled into one mean.
SlotCandidates build_slot_candidates(const TaggedUtterance& tagged, std::span<const std::size_t> ids,
                                     const Tensor& embeddings, const LabelSet& labels);

}  // namespace mslu
