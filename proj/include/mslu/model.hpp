#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "mslu/corpus.hpp"
#include "mslu/encoders.hpp"
#include "mslu/policy.hpp"
#include "mslu/reward.hpp"
#include "mslu/tagger.hpp"

namespace mslu {

struct ModelConfig {
  std::size_t m_embed = 200;  // embedding / feature width m
  std::size_t encoder_hidden = 64;
  std::size_t attention = 32;
  std::size_t tagger_hidden = 64;
  std::size_t policy_match_hidden = 64;
  std::size_t policy_hidden = 64;
  std::size_t reward_hidden = 32;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Every trainable part of the system. Each component owns its parameter set
// so the trainer can update them as separate groups.
struct Model {
  ModelConfig config;
  Vocab vocab;
  LabelSet labels;
  std::uint64_t seed = 0;

  ParamSet query_params, feedback_params, tagger_params, policy_params, reward_params;
  SentenceEncoder query_encoder, feedback_encoder;
  Tagger tagger;
  PolicyModel policy;
  RewardModel reward;

  // Free-form JSON object echoed into checkpoints (training config, baseline).
  std::string run_info = "{}";

  static Model create(const ModelConfig& config, Vocab vocab, LabelSet labels, std::uint64_t seed);

  std::size_t k() const noexcept { return labels.size(); }
  std::size_t m() const noexcept { return config.m_embed; }
  bool all_finite() const;
  bool same_parameters(const Model& other) const;
};

// Binary checkpoint; layout documented in docs/formats.md.
void save_checkpoint(std::ostream& out, const Model& model);
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(std::istream& in);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace mslu
