#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "mslu/corpus.hpp"
#include "mslu/errors.hpp"
#include "mslu/random.hpp"

using namespace mslu;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TaggedUtterance utt(std::initializer_list<std::pair<const char*, const char*>> pairs) {
  TaggedUtterance u;
  for (auto [tok, tag] : pairs) {
    u.tokens.emplace_back(tok);
    u.tags.emplace_back(tag);
  }
  return u;
}

SlotLexicon flight_lexicon() {
  return SlotLexicon::from_utterances(generate_flight_queries(99, 400));
}

}  // namespace

TEST_CASE("label set tag alphabet") {
  LabelSet labels({"fromloc", "toloc"});
  CHECK(labels.size() == 3);
  CHECK(labels.tag_count() == 5);
  CHECK(labels.tag_index("O") == 0);
  CHECK(labels.tag_index("B-fromloc") == 1);
  CHECK(labels.tag_index("I-fromloc") == 2);
  CHECK(labels.tag_index("B-toloc") == 3);
  CHECK(labels.tag_name(4) == "I-toloc");
  CHECK(LabelSet::tag_label(4) == 2);
  CHECK(LabelSet::tag_label(0) == 0);
  for (std::size_t t = 0; t < labels.tag_count(); ++t) CHECK(labels.tag_index(labels.tag_name(t)) == t);
  CHECK_THROWS_AS(labels.tag_index("B-airline"), VocabularyError);
  CHECK_THROWS_AS(labels.index("airline"), VocabularyError);
  CHECK_THROWS_AS(LabelSet({"a", "a"}), InputError);
}

TEST_CASE("vocab maps unknown tokens to id 0") {
  Vocab v({"show", "me", "show"});
  CHECK(v.size() == 3);
  CHECK(v.id("me") == 2);
  CHECK(v.id("zzz") == 0);
  CHECK(v.token(0) == "<unk>");
}

TEST_CASE("validate_iob") {
  CHECK(validate_iob({"O", "O", "O"}).empty());
  CHECK(validate_iob({"B-x", "I-x", "O", "I-x"}) == std::vector<std::size_t>{3});
  CHECK(validate_iob({"I-y"}) == std::vector<std::size_t>{0});
  CHECK(validate_iob({"B-x", "I-y"}) == std::vector<std::size_t>{1});
  CHECK(validate_iob({"B-x", "B-x", "I-x"}).empty());
  LabelSet labels({"x"});
  CHECK_THROWS_AS(validate_iob({"B-x", "B-zz"}, &labels), VocabularyError);
  CHECK_THROWS_AS(validate_iob({"Q-x"}), VocabularyError);
}

TEST_CASE("spans and slot values keep the last span per label") {
  const auto u = utt({{"from", "O"}, {"new", "B-city"}, {"york", "I-city"}, {"no", "O"}, {"boston", "B-city"}});
  const auto spans = extract_spans(u.tags);
  REQUIRE(spans.size() == 2);
  CHECK(spans[0] == SlotSpan{"city", 1, 3});
  CHECK(span_text(u.tokens, spans[0]) == "new york");
  CHECK(slot_values(u) == SlotValues{{"city", "boston"}});
}

TEST_CASE("tokenize") {
  CHECK(tokenize("Show me, FLIGHTS to Boston!") == std::vector<std::string>{"show", "me", "flights", "to", "boston"});
  CHECK(tokenize("  ").empty());
  CHECK(join_tokens({"a", "b"}) == "a b");
}

TEST_CASE("ATIS parse of a single utterance") {
  std::istringstream in("show\tO\nme\tO\nflights\tO\nfrom\tO\nboston\tB-fromloc.city_name\nto\tO\n"
                        "denver\tB-toloc.city_name\n\n");
  const auto corpus = parse_atis(in);
  REQUIRE(corpus.utterances.size() == 1);
  CHECK(corpus.utterances[0].tokens.size() == 7);
  CHECK(corpus.labels.labels() == std::vector<std::string>{"O", "fromloc.city_name", "toloc.city_name"});
  CHECK(slot_values(corpus.utterances[0]) ==
        SlotValues{{"fromloc.city_name", "boston"}, {"toloc.city_name", "denver"}});
}

TEST_CASE("ATIS I-tag after a different label is rejected with the utterance index") {
  std::istringstream in("a\tO\n\nfrom\tO\nboston\tB-fromloc\nto\tI-toloc\n\n");
  try {
    parse_atis(in);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("utterance 1") != std::string::npos);
  }
}

TEST_CASE("ATIS malformed lines report the line number") {
  std::istringstream missing_tab("show\tO\nme O\n");
  try {
    parse_atis(missing_tab);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::istringstream bad_tag("show\tX-foo\n");
  CHECK_THROWS_AS(parse_atis(bad_tag), ParseError);
}

TEST_CASE("ATIS fixture round-trips byte for byte") {
  const std::string text = slurp(MSLU_TEST_DATA "/atis_fixture.tsv");
  std::istringstream in(text);
  const auto corpus = parse_atis(in);
  CHECK(corpus.utterances.size() == 10);
  CHECK(serialize_atis(corpus.utterances) == text);
  std::istringstream again(serialize_atis(corpus.utterances));
  CHECK(parse_atis(again).utterances == corpus.utterances);
}

TEST_CASE("synthesis: one ADD round on a two-slot utterance") {
  const auto single = utt({{"show", "O"}, {"me", "O"}, {"flights", "O"}, {"from", "O"}, {"boston", "B-fromloc"},
                           {"to", "O"}, {"denver", "B-toloc"}});
  SynthesisOptions opts;
  opts.first_round_kind = FeedbackKind::Add;
  const auto s = synthesize_multiround(single, flight_lexicon(), 7, 1, opts);
  REQUIRE(s.rounds.size() == 1);
  CHECK(s.rounds[0].kind == FeedbackKind::Add);
  CHECK(s.gold_tables[0].size() == 1);
  CHECK(s.gold_tables[1] == SlotValues{{"fromloc", "boston"}, {"toloc", "denver"}});
  // The withheld slot and its carrier word are gone from the origin.
  const std::string withheld = s.gold_tables[0].count("fromloc") ? "toloc" : "fromloc";
  const auto origin_values = slot_values(s.origin);
  CHECK(origin_values.count(withheld) == 0);
  CHECK(s.origin.tokens.size() == 5);
  // The feedback carries exactly the withheld label.
  CHECK(slot_values(s.rounds[0].text) == SlotValues{{withheld, s.gold_tables[1].at(withheld)}});
  CHECK(gold_delta(s, 1) == std::vector<std::string>{withheld});
}

TEST_CASE("synthesis is deterministic per seed and varies across seeds") {
  const auto queries = generate_flight_queries(3, 50);
  const auto lex = flight_lexicon();
  std::set<std::string> distinct;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = synthesize_multiround(queries[seed], lex, seed, 4);
    const auto b = synthesize_multiround(queries[seed], lex, seed, 4);
    CHECK(a == b);
    const auto c = synthesize_multiround(queries[0], lex, seed, 4);
    distinct.insert(join_tokens(c.rounds[0].text.tokens) + join_tokens(c.origin.tokens));
  }
  CHECK(distinct.size() > 5);
}

TEST_CASE("synthesis: UPDATE changes exactly one existing label") {
  const auto single = utt({{"from", "O"}, {"boston", "B-fromloc"}, {"to", "O"}, {"denver", "B-toloc"}});
  SynthesisOptions opts;
  opts.first_round_kind = FeedbackKind::Update;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = synthesize_multiround(single, flight_lexicon(), seed, 1, opts);
    CHECK(s.rounds[0].kind == FeedbackKind::Update);
    CHECK(s.gold_tables[0] == SlotValues{{"fromloc", "boston"}, {"toloc", "denver"}});
    std::size_t differing = 0;
    for (const auto& [label, value] : s.gold_tables[1]) differing += s.gold_tables[0].at(label) != value;
    CHECK(differing == 1);
    CHECK(gold_delta(s, 1).size() == 1);
  }
}

TEST_CASE("synthesis rejects utterances without slots") {
  const auto single = utt({{"hello", "O"}, {"there", "O"}});
  CHECK_THROWS_AS(synthesize_multiround(single, flight_lexicon(), 1, 1), GenerationError);
  CHECK_THROWS_AS(synthesize_multiround(utt({{"boston", "B-fromloc"}}), flight_lexicon(), 1, 5), GenerationError);
}

TEST_CASE("property: replaying gold deltas reconstructs every gold table") {
  const auto queries = generate_flight_queries(11, 200);
  const auto lex = flight_lexicon();
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto s = synthesize_multiround(queries[i], lex, mix_seed(5, i), 1 + i % 4);
    validate_sample(s);
    SlotValues table = slot_values(s.origin);
    CHECK(table == s.gold_tables[0]);
    for (std::size_t t = 1; t <= s.rounds.size(); ++t) {
      // Feedback mentions exactly the delta labels, with their new values.
      const auto feedback = slot_values(s.rounds[t - 1].text);
      std::vector<std::string> mentioned;
      for (const auto& [label, value] : feedback) {
        mentioned.push_back(label);
        table[label] = value;
      }
      CHECK(mentioned == gold_delta(s, t));
      CHECK(table == s.gold_tables[t]);
    }
  }
}

TEST_CASE("flight generator stays inside the 50-word domain vocabulary") {
  MultiRoundCorpus corpus;
  const auto queries = generate_flight_queries(1, 300);
  const auto lex = SlotLexicon::from_utterances(queries);
  for (std::size_t i = 0; i < queries.size(); ++i)
    corpus.samples.push_back(synthesize_multiround(queries[i], lex, i, 4));
  const Vocab v = vocab_of(corpus);
  CHECK(v.size() - 1 <= 50);
  CHECK(v.size() - 1 >= 45);
  CHECK(labels_of(corpus).size() == 8);
  for (const auto& l : flight_slot_labels()) CHECK(labels_of(corpus).find(l).has_value());
}

TEST_CASE("multi-round corpus JSONL round trip") {
  MultiRoundCorpus corpus;
  const auto queries = generate_flight_queries(2, 20);
  const auto lex = SlotLexicon::from_utterances(queries);
  for (std::size_t i = 0; i < queries.size(); ++i)
    corpus.samples.push_back(synthesize_multiround(queries[i], lex, i, 1 + i % 4));
  std::stringstream ss;
  write_multiround(ss, corpus);
  const auto back = read_multiround(ss);
  CHECK(back.samples == corpus.samples);

  std::istringstream no_format(R"({"origin":{"tokens":["a"],"tags":["O"]},"rounds":[],"gold_tables":[{}]})");
  CHECK_THROWS_AS(read_multiround(no_format), FormatError);
  std::istringstream garbage("{not json\n");
  CHECK_THROWS_AS(read_multiround(garbage), FormatError);
}

TEST_CASE("slot F1 and sentence accuracy fixture cases") {
  using V = std::vector<SlotValues>;
  struct Case {
    V pred, gold;
    double p, r, f, acc;
  };
  const std::vector<Case> cases{
      {{{{"a", "1"}}}, {{{"a", "1"}}}, 1.0, 1.0, 1.0, 1.0},
      {{{}}, {{}}, 0.0, 0.0, 0.0, 1.0},
      {{{{"a", "1"}}}, {{{"a", "2"}}}, 0.0, 0.0, 0.0, 0.0},
      {{{{"a", "1"}, {"b", "2"}}}, {{{"a", "1"}, {"c", "3"}}}, 0.5, 0.5, 0.5, 0.0},
      {{{{"a", "1"}, {"b", "2"}, {"c", "3"}, {"d", "9"}}}, {{{"a", "1"}, {"b", "2"}, {"c", "3"}, {"d", "4"}}},
       0.75, 0.75, 0.75, 0.0},
      {{{{"a", "1"}}}, {{{"a", "1"}, {"b", "2"}}}, 1.0, 0.5, 2.0 / 3.0, 0.0},
      {{{{"a", "1"}, {"b", "2"}}}, {{{"a", "1"}}}, 0.5, 1.0, 2.0 / 3.0, 0.0},
      {{{}}, {{{"a", "1"}}}, 0.0, 0.0, 0.0, 0.0},
      {{{{"a", "1"}}, {{"a", "1"}}}, {{{"a", "1"}}, {{"a", "2"}}}, 0.5, 0.5, 0.5, 0.5},
      {{{{"a", "x y"}}, {}, {{"c", "z"}}, {{"b", "1"}}},
       {{{"a", "x y"}}, {{"b", "1"}}, {{"c", "z"}}, {{"b", "1"}}},
       1.0, 0.75, 6.0 / 7.0, 0.75},
  };
  for (const auto& c : cases) {
    const auto s = slot_f1(c.pred, c.gold);
    CHECK(s.precision == c.p);
    CHECK(s.recall == c.r);
    CHECK(s.f1 == c.f);
    CHECK(sentence_accuracy(c.pred, c.gold) == c.acc);
  }
  CHECK_THROWS_AS(slot_f1({{}}, {}), InputError);
  CHECK_THROWS_AS(sentence_accuracy({{}}, {}), InputError);
}
