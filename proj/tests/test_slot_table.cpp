#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "mslu/errors.hpp"
#include "mslu/random.hpp"
#include "mslu/slot_table.hpp"

using namespace mslu;

namespace {

const LabelSet kLabels(flight_slot_labels());

// A masked matrix whose listed labels carry a non-zero row, with matching
// provenance values.
struct Delta {
  Tensor masked;
  std::vector<std::optional<std::string>> values;
};

Delta make_delta(const SlotValues& entries, std::size_t m = 3) {
  Delta d{Tensor(Shape{kLabels.size(), m}, 0.0), std::vector<std::optional<std::string>>(kLabels.size())};
  for (const auto& [label, value] : entries) {
    const std::size_t i = kLabels.index(label);
    for (std::size_t j = 0; j < m; ++j) d.masked.at(i, j) = 0.25 * static_cast<double>(j + i);
    d.masked.at(i, 0) = 1.0;
    d.values[i] = value;
  }
  return d;
}

SlotFillingTable apply(const SlotFillingTable& t, const SlotValues& entries, std::size_t round) {
  const Delta d = make_delta(entries);
  return update_table(t, d.masked, d.values, round);
}

Delta random_delta(Rng& rng, bool with_decoys) {
  SlotValues entries;
  for (std::size_t i = 1; i < kLabels.size(); ++i)
    if (rng.bernoulli(0.35)) entries[kLabels.label(i)] = "v" + std::to_string(rng.index(5));
  Delta d = make_delta(entries);
  // Values on masked-out labels must be ignored.
  if (with_decoys)
    for (std::size_t i = 1; i < kLabels.size(); ++i)
      if (!d.values[i] && rng.bernoulli(0.5)) d.values[i] = "decoy";
  return d;
}

}  // namespace

TEST_CASE("update_table: an all-zero matrix leaves the table unchanged") {
  const SlotFillingTable t = apply(SlotFillingTable(kLabels.size()), {{"fromloc", "boston"}}, 0);
  std::vector<std::optional<std::string>> values(kLabels.size(), std::string("ignored"));
  CHECK(update_table(t, Tensor(Shape{kLabels.size(), 3}), values, 1) == t);
}

TEST_CASE("update_table: insert into an empty table") {
  const SlotFillingTable t = apply(SlotFillingTable(kLabels.size()), {{"fromloc", "boston"}}, 0);
  CHECK(t.filled() == 1);
  CHECK(t.values(kLabels) == SlotValues{{"fromloc", "boston"}});
  CHECK(t.rows[kLabels.index("fromloc")]->source_round == 0);
}

TEST_CASE("update_table: the Figure 1 flow overwrites the returning date only") {
  SlotFillingTable t(kLabels.size());
  t = apply(t, {{"fromloc", "boston"}, {"toloc", "cincinnati"}}, 0);
  t = apply(t, {{"depart_date", "monday"}, {"return_date", "friday"}}, 1);
  t = apply(t, {{"flight_type", "round trip"}}, 2);
  t = apply(t, {{"return_date", "sunday"}}, 3);
  CHECK(t.values(kLabels) == SlotValues{{"fromloc", "boston"},
                                        {"toloc", "cincinnati"},
                                        {"depart_date", "monday"},
                                        {"return_date", "sunday"},
                                        {"flight_type", "round trip"}});
  CHECK(t.rows[kLabels.index("return_date")]->source_round == 3);
  CHECK(t.rows[kLabels.index("depart_date")]->source_round == 1);
  CHECK(t.rows[kLabels.index("flight_type")]->source_round == 2);
}

TEST_CASE("update_table: the stored embedding is the masked row") {
  const Delta d = make_delta({{"airline", "delta"}});
  const auto t = update_table(SlotFillingTable(kLabels.size()), d.masked, d.values, 2);
  const auto row = d.masked.row(kLabels.index("airline"));
  CHECK(t.rows[kLabels.index("airline")]->embedding.data() == std::vector<double>(row.begin(), row.end()));
}

TEST_CASE("update_table: a non-zero row without a value is an integrity error") {
  Delta d = make_delta({{"toloc", "denver"}});
  d.values[kLabels.index("toloc")].reset();
  CHECK_THROWS_AS(update_table(SlotFillingTable(kLabels.size()), d.masked, d.values, 0), IntegrityError);
}

TEST_CASE("update_table: label-space mismatch is a dimension error") {
  const Delta d = make_delta({});
  CHECK_THROWS_AS(update_table(SlotFillingTable(3), d.masked, d.values, 0), DimensionError);
}

TEST_CASE("property: idempotence, non-mutation and ADD monotonicity over 1000 random sequences") {
  Rng rng(2718);
  for (int trial = 0; trial < 1000; ++trial) {
    SlotFillingTable t(kLabels.size());
    std::set<std::size_t> filled;
    const std::size_t steps = 1 + rng.index(6);
    for (std::size_t round = 0; round < steps; ++round) {
      const Delta d = random_delta(rng, true);
      const SlotFillingTable before = t;
      const SlotFillingTable once = update_table(t, d.masked, d.values, round);
      CHECK(t == before);
      CHECK(update_table(once, d.masked, d.values, round) == once);
      std::set<std::size_t> now;
      for (std::size_t i = 0; i < once.rows.size(); ++i) {
        if (once.rows[i]) now.insert(i);
        if (d.values[i] && d.masked.row(i)[0] != 0.0) {
          CHECK(once.rows[i]->value == *d.values[i]);
        } else {
          CHECK(once.rows[i] == before.rows[i]);
        }
      }
      CHECK(std::includes(now.begin(), now.end(), filled.begin(), filled.end()));
      filled = now;
      t = once;
    }
  }
}

TEST_CASE("property: replaying gold deltas reproduces every synthesized gold table") {
  const auto queries = generate_flight_queries(31, 400);
  const auto lexicon = SlotLexicon::from_utterances(generate_flight_queries(999, 2000));
  std::size_t replayed = 0;
  for (std::size_t n = 0; n < queries.size(); ++n) {
    MultiRoundSample s;
    try {
      s = synthesize_multiround(queries[n], lexicon, mix_seed(31, n), 1 + n % 4);
    } catch (const GenerationError&) {
      continue;
    }
    SlotFillingTable t(kLabels.size());
    for (std::size_t round = 0; round < s.gold_tables.size(); ++round) {
      SlotValues delta;
      for (const auto& label : gold_delta(s, round)) delta[label] = s.gold_tables[round].at(label);
      t = apply(t, delta, round);
      REQUIRE(t.values(kLabels) == s.gold_tables[round]);
    }
    ++replayed;
  }
  CHECK(replayed > 300);
}

// ---------------------------------------------------------------- templates

TEST_CASE("render: empty table is incomplete with no fields") {
  const auto q = TemplateSet::builtin().render({});
  CHECK(!q.complete);
  CHECK(q.fields.empty());
  CHECK(q.text.empty());
}

TEST_CASE("render: origin and destination") {
  const auto q = TemplateSet::builtin().render({{"fromloc", "boston"}, {"toloc", "denver"}});
  CHECK(q.complete);
  CHECK(q.text == "flights from boston to denver");
  CHECK(q.fields == SlotValues{{"fromloc", "boston"}, {"toloc", "denver"}});
}

TEST_CASE("render: the full Figure 1 table mentions both dates and the flight type") {
  const SlotValues full{{"fromloc", "boston"},
                        {"toloc", "cincinnati"},
                        {"depart_date", "monday"},
                        {"return_date", "sunday"},
                        {"flight_type", "round trip"}};
  const auto q = TemplateSet::builtin().render(full);
  CHECK(q.text == "round trip flights from boston to cincinnati leaving on monday returning on sunday");
  CHECK(q.fields == full);
}

TEST_CASE("render: a partial table without origin or destination is flagged") {
  const auto q = TemplateSet::builtin().render({{"airline", "delta"}});
  CHECK(!q.complete);
  CHECK(q.fields == SlotValues{{"airline", "delta"}});
}

TEST_CASE("render_query reads the table through its labels") {
  SlotFillingTable t(kLabels.size());
  t = apply(t, {{"toloc", "dallas"}, {"airline", "united"}}, 0);
  CHECK(render_query(t, kLabels, TemplateSet::builtin()).text == "flights to dallas on united");
}

TEST_CASE("template file in data/ matches the built-in set") {
  const auto file = TemplateSet::load(std::string(MSLU_REPO_DATA) + "/query_templates.txt");
  const SlotValues v{{"fromloc", "boston"}, {"toloc", "denver"}, {"depart_time", "morning"}};
  CHECK(file.render(v).text == TemplateSet::builtin().render(v).text);
}

TEST_CASE("template parse errors") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return TemplateSet::parse(in);
  };
  CHECK_THROWS_AS(parse("skeleton a = {a}\n"), FormatError);
  CHECK_THROWS_AS(parse("mslu-templates 2\n"), FormatError);
  CHECK_THROWS_AS(parse("mslu-templates 1\nskeleton a = {b}\n"), FormatError);
  CHECK_THROWS_AS(parse("mslu-templates 1\nwidget a = x\n"), FormatError);
  CHECK_THROWS_AS(parse("mslu-templates 1\nclause a,b = {a}\n"), FormatError);
  CHECK_THROWS_AS(parse(""), FormatError);
  CHECK_THROWS_AS(TemplateSet::load("/nonexistent/templates.txt"), InputError);
}

// ---------------------------------------------------------------- flights

namespace {

class DownBackend : public FlightBackend {
 public:
  std::vector<Flight> search(const SlotValues&) const override { throw TransportError("backend down"); }
};

MockFlightBackend fixture_backend() { return MockFlightBackend::load(std::string(MSLU_REPO_DATA) + "/flights.txt"); }

}  // namespace

TEST_CASE("flight db fixture has 200 flights") { CHECK(fixture_backend().flights().size() == 200); }

TEST_CASE("flight search: a query matching exactly one fixture flight") {
  const auto q = TemplateSet::builtin().render(
      {{"fromloc", "boston"}, {"toloc", "cincinnati"}, {"return_date", "friday"}, {"airline", "united"}});
  const auto r = flight_search(q, fixture_backend());
  CHECK(r.status == SearchStatus::Ok);
  REQUIRE(r.flights.size() == 1);
  CHECK(r.flights[0] ==
        Flight{"united", "boston", "cincinnati", "monday", "friday", "round trip", 389.0});
}

TEST_CASE("flight search: results keep database order") {
  const auto q = TemplateSet::builtin().render({{"fromloc", "boston"},
                                                {"toloc", "cincinnati"},
                                                {"depart_date", "monday"},
                                                {"return_date", "sunday"},
                                                {"flight_type", "round trip"}});
  const auto r = flight_search(q, fixture_backend());
  REQUIRE(r.flights.size() >= 2);
  CHECK(r.flights[0].airline == "delta");
  CHECK(r.flights[1].airline == "american");
}

TEST_CASE("flight search: no match is an empty result, not an error") {
  const auto q = TemplateSet::builtin().render({{"fromloc", "boston"}, {"toloc", "nowhere"}});
  const auto r = flight_search(q, fixture_backend());
  CHECK(r.status == SearchStatus::Ok);
  CHECK(r.flights.empty());
}

TEST_CASE("flight search: incomplete queries report insufficient slots without a lookup") {
  const DownBackend down;
  const auto r = flight_search(TemplateSet::builtin().render({{"airline", "delta"}}), down);
  CHECK(r.status == SearchStatus::InsufficientSlots);
  CHECK(r.flights.empty());
}

TEST_CASE("flight search: an unavailable backend is a transport error") {
  const DownBackend down;
  CHECK_THROWS_AS(flight_search(TemplateSet::builtin().render({{"toloc", "denver"}}), down), TransportError);
  CHECK_THROWS_AS(MockFlightBackend::load("/nonexistent/flights.txt"), TransportError);
}

TEST_CASE("flight db parse errors name the line") {
  std::istringstream bad("# header\ndelta|boston|denver|monday|-|one way\n");
  try {
    MockFlightBackend::parse(bad);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::istringstream fare("delta|boston|denver|monday|-|one way|cheap\n");
  CHECK_THROWS_AS(MockFlightBackend::parse(fare), FormatError);
}
