#include "mslu/synthetic.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mslu/errors.hpp"
#include "mslu/random.hpp"

namespace mslu {

using nlohmann::json;

MultiRoundCorpus synthetic_corpus(const SyntheticCorpusOptions& options) {
  if (options.rounds == 0 && options.max_rounds == 0) throw InputError("max_rounds must be positive");
  const auto lexicon = SlotLexicon::from_utterances(generate_flight_queries(options.lexicon_seed, options.lexicon_queries));
  const auto queries = generate_flight_queries(options.seed, 2 * options.samples);
  MultiRoundCorpus corpus;
  for (std::size_t i = 0; corpus.samples.size() < options.samples && i < queries.size(); ++i) {
    Rng rng(mix_seed(options.seed, 5, i));
    const std::size_t rounds = options.rounds ? options.rounds : 1 + rng.index(options.max_rounds);
    try {
      corpus.samples.push_back(synthesize_multiround(queries[i], lexicon, mix_seed(options.seed, 6, i), rounds));
    } catch (const GenerationError&) {
    }
  }
  return corpus;
}

MultiRoundCorpus desk_train_corpus() { return synthetic_corpus({}); }

MultiRoundCorpus desk_test_corpus() {
  SyntheticCorpusOptions o;
  o.seed = 2;
  o.samples = 100;
  o.rounds = 4;
  return synthetic_corpus(o);
}

ModelConfig desk_model_config() {
  ModelConfig c;
  c.m_embed = 32;
  c.encoder_hidden = 32;
  c.attention = 16;
  c.tagger_hidden = 16;
  c.policy_match_hidden = 32;
  c.policy_hidden = 32;
  c.reward_hidden = 8;
  return c;
}

TrainConfig desk_train_config() {
  TrainConfig c;
  c.learning_rate = 1e-2;
  c.policy_learning_rate = 3e-3;
  c.reward_learning_rate = 3e-3;
  c.batch_size = 16;
  c.rollouts_per_sample = 1;
  c.epochs = 30;
  c.tagger_epochs = 8;
  c.seed = 1;
  return c;
}

Scenario parse_scenario(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(std::string("scenario: ") + e.what());
  }
  try {
    if (j.at("format").get<int>() != 1) throw FormatError("scenario: unsupported format");
    Scenario s;
    s.name = j.at("name").get<std::string>();
    s.query = j.at("query").get<std::string>();
    s.feedback = j.at("feedback").get<std::vector<std::string>>();
    if (j.contains("expected_final")) s.expected_final = j.at("expected_final").get<SlotValues>();
    if (s.query.empty()) throw FormatError("scenario: empty query");
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("scenario: ") + e.what());
  }
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scenario " + path.string());
  return parse_scenario(in);
}

std::string scenario_json(const Scenario& s) {
  json j{{"format", 1}, {"name", s.name}, {"query", s.query}, {"feedback", s.feedback}};
  if (!s.expected_final.empty()) j["expected_final"] = s.expected_final;
  return j.dump(2) + "\n";
}

Scenario builtin_scenario(const std::string& name) {
  if (name == "figure1") {
    // Round 2 adds both dates, round 3 the flight type, round 4 moves the
    // returning date.
    return {"figure1",
            "show me flights from boston to cincinnati",
            {"i want to leave on monday and return on friday actually", "also book a round trip",
             "no i want to return on sunday instead"},
            {{"fromloc", "boston"},
             {"toloc", "cincinnati"},
             {"depart_date", "monday"},
             {"return_date", "sunday"},
             {"flight_type", "round trip"}}};
  }
  throw InputError("unknown scenario '" + name + "'");
}

std::vector<std::string> builtin_scenario_names() { return {"figure1"}; }

}  // namespace mslu
