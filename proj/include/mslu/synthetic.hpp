#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mslu/corpus.hpp"
#include "mslu/model.hpp"
#include "mslu/trainer.hpp"

namespace mslu {

// The desk-scale multiround corpus built on the flight-booking generator.
struct SyntheticCorpusOptions {
  std::uint64_t seed = 1;
  std::size_t samples = 500;
  // 0 draws 1..max_rounds per sample; otherwise every sample gets this many.
  std::size_t rounds = 0;
  std::size_t max_rounds = 4;
  // The UPDATE lexicon comes from a separate, larger query draw.
  std::uint64_t lexicon_seed = 999;
  std::size_t lexicon_queries = 2000;
};

// Queries whose slots cannot support the requested rounds are skipped, so the
// result can be shorter than `samples` only if the query pool runs dry.
MultiRoundCorpus synthetic_corpus(const SyntheticCorpusOptions& options);

// 500 training samples with 1..4 rounds (seed 1) and 100 test samples with
// exactly 4 rounds (seed 2).
MultiRoundCorpus desk_train_corpus();
MultiRoundCorpus desk_test_corpus();

// Sizes and learning rates used for the desk-scale experiments.
ModelConfig desk_model_config();
TrainConfig desk_train_config();

// A scripted session: one query followed by feedback utterances.
struct Scenario {
  std::string name;
  std::string query;
  std::vector<std::string> feedback;
  SlotValues expected_final;  // empty when the script does not pin one
};

// Scenario file: JSON {"format": 1, "name", "query", "feedback": [...],
// "expected_final": {label: value}}.
Scenario parse_scenario(std::istream& in);
Scenario load_scenario(const std::filesystem::path& path);
std::string scenario_json(const Scenario& scenario);

// Built-in scenarios by name ("figure1"); throws InputError otherwise.
Scenario builtin_scenario(const std::string& name);
std::vector<std::string> builtin_scenario_names();

}  // namespace mslu
