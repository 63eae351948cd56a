#include "mslu/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mslu/errors.hpp"
#include "mslu/random.hpp"

namespace mslu {

// ---------------------------------------------------------------- LabelSet

LabelSet::LabelSet(const std::vector<std::string>& slot_labels) : LabelSet() {
  for (const auto& l : slot_labels) {
    if (l == kOutsideLabel) continue;
    if (find(l)) throw InputError("duplicate slot label '" + l + "'");
    add(l);
  }
}

void LabelSet::add(std::string label) {
  if (label.empty()) throw InputError("empty slot label");
  index_.emplace(label, labels_.size());
  labels_.push_back(std::move(label));
}

LabelSet LabelSet::from_tags(const std::vector<std::vector<std::string>>& tag_sequences) {
  LabelSet set;
  for (const auto& seq : tag_sequences)
    for (const auto& tag : seq) {
      auto [prefix, label] = split_tag(tag);
      if (prefix != 'O' && !set.find(label)) set.add(label);
    }
  return set;
}

std::optional<std::size_t> LabelSet::find(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t LabelSet::index(std::string_view label) const {
  if (auto i = find(label)) return *i;
  throw VocabularyError("unknown slot label '" + std::string(label) + "'");
}

std::size_t LabelSet::tag_index(std::string_view tag) const {
  auto [prefix, label] = split_tag(tag);
  if (prefix == 'O') return 0;
  const auto i = find(label);
  if (!i) throw VocabularyError("tag '" + std::string(tag) + "' names an unknown label");
  return prefix == 'B' ? 2 * *i - 1 : 2 * *i;
}

std::string LabelSet::tag_name(std::size_t tag) const {
  if (tag == 0) return std::string(kOutsideLabel);
  if (tag >= tag_count()) throw VocabularyError("tag index " + std::to_string(tag) + " out of range");
  return (tag_is_begin(tag) ? "B-" : "I-") + labels_[tag_label(tag)];
}

// ---------------------------------------------------------------- Vocab

Vocab::Vocab(const std::vector<std::string>& tokens) : Vocab() {
  for (const auto& t : tokens) add(t);
}

void Vocab::add(const std::string& token) {
  if (ids_.count(token) || token == tokens_[0]) return;
  ids_.emplace(token, tokens_.size());
  tokens_.push_back(token);
}

std::size_t Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? 0 : it->second;
}

// ---------------------------------------------------------------- IOB

std::pair<char, std::string> split_tag(std::string_view tag) {
  if (tag == kOutsideLabel) return {'O', std::string(kOutsideLabel)};
  if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') return {tag[0], std::string(tag.substr(2))};
  throw VocabularyError("malformed IOB tag '" + std::string(tag) + "'");
}

std::vector<std::size_t> validate_iob(const std::vector<std::string>& tags, const LabelSet* labels) {
  std::vector<std::size_t> violations;
  std::string open;  // label of the span the previous tag belongs to, empty after O
  for (std::size_t i = 0; i < tags.size(); ++i) {
    auto [prefix, label] = split_tag(tags[i]);
    if (labels && prefix != 'O' && !labels->find(label))
      throw VocabularyError("tag '" + tags[i] + "' at index " + std::to_string(i) + " names an unknown label");
    if (prefix == 'I' && open != label) violations.push_back(i);
    open = prefix == 'O' ? std::string() : label;
  }
  return violations;
}

std::vector<SlotSpan> extract_spans(const std::vector<std::string>& tags) {
  std::vector<SlotSpan> spans;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    auto [prefix, label] = split_tag(tags[i]);
    if (prefix == 'O') continue;
    if (prefix == 'I' && !spans.empty() && spans.back().end == i && spans.back().label == label) {
      spans.back().end = i + 1;
      continue;
    }
    if (prefix == 'I') throw ValidationError("I-" + label + " at index " + std::to_string(i) + " has no open span");
    spans.push_back({label, i, i + 1});
  }
  return spans;
}

std::string span_text(const std::vector<std::string>& tokens, const SlotSpan& span) {
  std::string out;
  for (std::size_t i = span.begin; i < span.end; ++i) {
    if (i > span.begin) out += ' ';
    out += tokens.at(i);
  }
  return out;
}

SlotValues slot_values(const TaggedUtterance& utterance) {
  SlotValues values;
  for (const auto& span : extract_spans(utterance.tags)) values[span.label] = span_text(utterance.tokens, span);
  return values;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c) || (std::ispunct(c) && ch != '\'' && ch != '-')) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current += static_cast<char>(std::tolower(c));
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

// ---------------------------------------------------------------- ATIS

AtisCorpus parse_atis(std::istream& in) {
  AtisCorpus corpus;
  TaggedUtterance current;
  std::string line;
  std::size_t line_no = 0;
  auto flush = [&] {
    if (current.tokens.empty()) return;
    corpus.utterances.push_back(std::move(current));
    current = {};
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() || line.find('\t', tab + 1) != std::string::npos)
      throw ParseError("line " + std::to_string(line_no) + ": expected 'token<TAB>tag'");
    std::string tag = line.substr(tab + 1);
    try {
      split_tag(tag);
    } catch (const VocabularyError& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    current.tokens.push_back(line.substr(0, tab));
    current.tags.push_back(std::move(tag));
  }
  flush();

  for (std::size_t u = 0; u < corpus.utterances.size(); ++u) {
    const auto bad = validate_iob(corpus.utterances[u].tags);
    if (!bad.empty())
      throw ValidationError("utterance " + std::to_string(u) + ": IOB violation at token " + std::to_string(bad.front()) +
                            " ('" + corpus.utterances[u].tags[bad.front()] + "')");
  }
  std::vector<std::vector<std::string>> tags;
  tags.reserve(corpus.utterances.size());
  for (const auto& u : corpus.utterances) tags.push_back(u.tags);
  corpus.labels = LabelSet::from_tags(tags);
  return corpus;
}

AtisCorpus parse_atis_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open ATIS file " + path.string());
  return parse_atis(in);
}

std::string serialize_atis(const std::vector<TaggedUtterance>& utterances) {
  std::string out;
  for (const auto& u : utterances) {
    for (std::size_t i = 0; i < u.tokens.size(); ++i) out += u.tokens[i] + '\t' + u.tags[i] + '\n';
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------- samples

std::string_view to_string(FeedbackKind kind) { return kind == FeedbackKind::Add ? "ADD" : "UPDATE"; }

FeedbackKind parse_feedback_kind(std::string_view text) {
  if (text == "ADD") return FeedbackKind::Add;
  if (text == "UPDATE") return FeedbackKind::Update;
  throw FormatError("unknown feedback kind '" + std::string(text) + "'");
}

std::vector<std::string> gold_delta(const MultiRoundSample& sample, std::size_t round) {
  const SlotValues& now = sample.gold_tables.at(round);
  std::vector<std::string> delta;
  for (const auto& [label, value] : now) {
    if (round == 0) {
      delta.push_back(label);
      continue;
    }
    const SlotValues& before = sample.gold_tables[round - 1];
    auto it = before.find(label);
    if (it == before.end() || it->second != value) delta.push_back(label);
  }
  return delta;
}

namespace {

void validate_utterance(const TaggedUtterance& u, const std::string& where) {
  if (u.tokens.empty()) throw ValidationError(where + ": empty utterance");
  if (u.tokens.size() != u.tags.size())
    throw ValidationError(where + ": " + std::to_string(u.tokens.size()) + " tokens but " +
                          std::to_string(u.tags.size()) + " tags");
  const auto bad = validate_iob(u.tags);
  if (!bad.empty()) throw ValidationError(where + ": IOB violation at token " + std::to_string(bad.front()));
}

}  // namespace

void validate_sample(const MultiRoundSample& sample) {
  validate_utterance(sample.origin, "origin");
  if (sample.rounds.empty() || sample.rounds.size() > 4)
    throw ValidationError("sample has " + std::to_string(sample.rounds.size()) + " rounds; expected 1..4");
  if (sample.gold_tables.size() != sample.rounds.size() + 1)
    throw ValidationError("sample has " + std::to_string(sample.gold_tables.size()) + " gold tables for " +
                          std::to_string(sample.rounds.size()) + " rounds");
  for (std::size_t t = 1; t <= sample.rounds.size(); ++t) {
    const auto& round = sample.rounds[t - 1];
    validate_utterance(round.text, "round " + std::to_string(t));
    const SlotValues& before = sample.gold_tables[t - 1];
    const SlotValues& after = sample.gold_tables[t];
    for (const auto& [label, value] : before)
      if (!after.count(label)) throw ValidationError("round " + std::to_string(t) + " drops label " + label);
    bool added = false, changed = false;
    for (const auto& [label, value] : after) {
      auto it = before.find(label);
      if (it == before.end()) added = true;
      else if (it->second != value) changed = true;
    }
    if (round.kind == FeedbackKind::Add && !added)
      throw ValidationError("ADD round " + std::to_string(t) + " introduces no new label");
    if (round.kind == FeedbackKind::Update && !changed)
      throw ValidationError("UPDATE round " + std::to_string(t) + " changes no existing label");
  }
}

// ---------------------------------------------------------------- lexicon

SlotLexicon SlotLexicon::from_utterances(const std::vector<TaggedUtterance>& utterances) {
  SlotLexicon lex;
  for (const auto& u : utterances)
    for (const auto& span : extract_spans(u.tags)) lex.add(span.label, span_text(u.tokens, span));
  return lex;
}

void SlotLexicon::add(const std::string& label, const std::string& value) {
  auto& list = values_[label];
  if (std::find(list.begin(), list.end(), value) == list.end()) list.push_back(value);
}

const std::vector<std::string>& SlotLexicon::values(const std::string& label) const {
  static const std::vector<std::string> none;
  auto it = values_.find(label);
  return it == values_.end() ? none : it->second;
}

// ---------------------------------------------------------------- synthesis

namespace {

const std::set<std::string>& carrier_words() {
  static const std::set<std::string> words{"from", "to",  "on", "leaving", "returning", "in",       "the",
                                           "at",   "via", "by", "with",    "departing", "arriving"};
  return words;
}

// Words placed before a slot value in feedback: "i want to <phrase> <value>".
std::vector<std::string> label_phrase(const std::string& label) {
  static const std::map<std::string, std::vector<std::string>> phrases{
      {"fromloc", {"leave", "from"}},  {"toloc", {"go", "to"}},        {"depart_date", {"leave", "on"}},
      {"return_date", {"return", "on"}}, {"airline", {"fly", "with"}}, {"flight_type", {"book", "a"}},
      {"depart_time", {"leave", "in", "the"}}};
  if (auto it = phrases.find(label); it != phrases.end()) return it->second;
  std::vector<std::string> words{"have"};
  std::string word;
  for (char c : label) {
    if (c == '.' || c == '_') {
      if (!word.empty()) words.push_back(word);
      word.clear();
    } else {
      word += c;
    }
  }
  if (!word.empty()) words.push_back(word);
  return words;
}

struct FeedbackBuilder {
  TaggedUtterance utt;
  void words(std::initializer_list<const char*> ws) {
    for (const char* w : ws) word(w);
  }
  void word(const std::string& w) {
    utt.tokens.push_back(w);
    utt.tags.emplace_back(kOutsideLabel);
  }
  void slot(const std::string& label, const std::string& value) {
    for (const auto& w : label_phrase(label)) word(w);
    const auto toks = tokenize(value);
    for (std::size_t i = 0; i < toks.size(); ++i) {
      utt.tokens.push_back(toks[i]);
      utt.tags.push_back((i == 0 ? "B-" : "I-") + label);
    }
  }
};

TaggedUtterance add_feedback(const std::vector<std::pair<std::string, std::string>>& slots, Rng& rng) {
  FeedbackBuilder b;
  const bool polite = rng.bernoulli(0.5);
  if (polite) b.words({"i", "want", "to"});
  else b.words({"also"});
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (i) b.word("and");
    b.slot(slots[i].first, slots[i].second);
  }
  if (polite) b.word("actually");
  return b.utt;
}

TaggedUtterance update_feedback(const std::string& label, const std::string& value, Rng& rng) {
  FeedbackBuilder b;
  if (rng.bernoulli(0.5)) {
    b.words({"no", "i", "want", "to"});
    b.slot(label, value);
    b.word("instead");
  } else {
    b.words({"actually", "i", "want", "to"});
    b.slot(label, value);
  }
  return b.utt;
}

// Removes every span of the withheld labels together with up to two carrier
// words directly in front of each span.
TaggedUtterance withhold(const TaggedUtterance& u, const std::set<std::string>& labels) {
  std::vector<bool> drop(u.tokens.size(), false);
  for (const auto& span : extract_spans(u.tags)) {
    if (!labels.count(span.label)) continue;
    for (std::size_t i = span.begin; i < span.end; ++i) drop[i] = true;
    std::size_t removed = 0;
    for (std::size_t i = span.begin; i-- > 0 && removed < 2;) {
      if (u.tags[i] != kOutsideLabel || !carrier_words().count(u.tokens[i]) || drop[i]) break;
      drop[i] = true;
      ++removed;
    }
  }
  TaggedUtterance out;
  for (std::size_t i = 0; i < u.tokens.size(); ++i)
    if (!drop[i]) {
      out.tokens.push_back(u.tokens[i]);
      out.tags.push_back(u.tags[i]);
    }
  return out;
}

}  // namespace

MultiRoundSample synthesize_multiround(const TaggedUtterance& single_turn, const SlotLexicon& lexicon,
                                       std::uint64_t seed, std::size_t rounds, const SynthesisOptions& options) {
  if (rounds < 1 || rounds > 4) throw GenerationError("round count must be in 1..4, got " + std::to_string(rounds));
  validate_utterance(single_turn, "single-turn utterance");
  const SlotValues full = slot_values(single_turn);
  if (full.empty()) throw GenerationError("utterance '" + join_tokens(single_turn.tokens) + "' has no slots");

  // Labels in order of first appearance.
  std::vector<std::string> labels;
  for (const auto& span : extract_spans(single_turn.tags))
    if (std::find(labels.begin(), labels.end(), span.label) == labels.end()) labels.push_back(span.label);

  Rng rng(seed);
  auto updatable = [&](const SlotValues& table) {
    std::vector<std::string> out;
    for (const auto& [label, value] : table) {
      const auto& vals = lexicon.values(label);
      if (std::any_of(vals.begin(), vals.end(), [&](const std::string& v) { return v != value; })) out.push_back(label);
    }
    return out;
  };

  // Plan round kinds and how many withheld slots each ADD round supplies.
  std::size_t budget = labels.size() - 1;
  std::vector<FeedbackKind> kinds;
  std::vector<std::size_t> add_counts;
  for (std::size_t r = 0; r < rounds; ++r) {
    FeedbackKind kind;
    if (r == 0 && options.first_round_kind) {
      kind = *options.first_round_kind;
      if (kind == FeedbackKind::Add && budget == 0)
        throw GenerationError("ADD round requested but the utterance has a single slot label");
    } else {
      kind = budget > 0 && rng.bernoulli(0.5) ? FeedbackKind::Add : FeedbackKind::Update;
    }
    std::size_t n = 0;
    if (kind == FeedbackKind::Add) {
      n = budget >= 2 && rng.bernoulli(options.double_add_probability) ? 2 : 1;
      budget -= n;
    }
    kinds.push_back(kind);
    add_counts.push_back(n);
  }

  std::size_t total_withheld = 0;
  for (auto n : add_counts) total_withheld += n;
  std::vector<std::string> order = labels;
  rng.shuffle(order);
  const std::vector<std::string> withheld(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(total_withheld));

  MultiRoundSample sample;
  sample.origin = withhold(single_turn, std::set<std::string>(withheld.begin(), withheld.end()));
  sample.gold_tables.push_back(slot_values(sample.origin));

  std::size_t next_withheld = 0;
  for (std::size_t r = 0; r < rounds; ++r) {
    SlotValues table = sample.gold_tables.back();
    FeedbackRound round;
    round.kind = kinds[r];
    if (round.kind == FeedbackKind::Add) {
      std::vector<std::pair<std::string, std::string>> slots;
      for (std::size_t i = 0; i < add_counts[r]; ++i) {
        const auto& label = withheld[next_withheld++];
        slots.emplace_back(label, full.at(label));
        table[label] = full.at(label);
      }
      round.text = add_feedback(slots, rng);
    } else {
      const auto candidates = updatable(table);
      if (candidates.empty())
        throw GenerationError("no slot of '" + join_tokens(single_turn.tokens) + "' has an alternative value");
      const std::string label = rng.pick(candidates);
      std::vector<std::string> alternatives;
      for (const auto& v : lexicon.values(label))
        if (v != table.at(label)) alternatives.push_back(v);
      const std::string value = rng.pick(alternatives);
      table[label] = value;
      round.text = update_feedback(label, value, rng);
    }
    sample.rounds.push_back(std::move(round));
    sample.gold_tables.push_back(std::move(table));
  }
  validate_sample(sample);
  return sample;
}

// ---------------------------------------------------------------- flight domain

namespace {

struct Clause {
  std::vector<std::string> lead;
  std::string label;
  std::string value;
};

const std::vector<std::string> kCities{"boston",     "denver",       "atlanta", "dallas",
                                       "seattle",    "cincinnati",   "philadelphia", "new york"};
const std::vector<std::string> kDays{"monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"};
const std::vector<std::string> kAirlines{"delta", "united", "american"};
const std::vector<std::string> kFlightTypes{"round trip", "one way"};
const std::vector<std::string> kTimes{"morning", "afternoon", "evening"};

}  // namespace

std::vector<std::string> flight_slot_labels() {
  return {"fromloc", "toloc", "depart_date", "return_date", "airline", "flight_type", "depart_time"};
}

std::vector<TaggedUtterance> generate_flight_queries(std::uint64_t seed, std::size_t count) {
  Rng rng(seed);
  std::vector<TaggedUtterance> out;
  out.reserve(count);
  while (out.size() < count) {
    FeedbackBuilder b;
    const bool has_type = rng.bernoulli(0.3);
    const std::string type = rng.pick(kFlightTypes);
    auto put_value = [&](const std::string& label, const std::string& value) {
      const auto toks = tokenize(value);
      for (std::size_t i = 0; i < toks.size(); ++i) {
        b.utt.tokens.push_back(toks[i]);
        b.utt.tags.push_back((i == 0 ? "B-" : "I-") + label);
      }
    };
    if (rng.bernoulli(0.5)) {
      b.words({"show", "me"});
      if (has_type) put_value("flight_type", type);
      b.word("flights");
    } else {
      b.words({"i", "want", "a"});
      if (has_type) put_value("flight_type", type);
      b.word("flight");
    }

    std::vector<Clause> fixed, free;
    const std::string from = rng.pick(kCities);
    std::string to = rng.pick(kCities);
    while (to == from) to = rng.pick(kCities);
    if (rng.bernoulli(0.9)) fixed.push_back({{"from"}, "fromloc", from});
    if (rng.bernoulli(0.95)) fixed.push_back({{"to"}, "toloc", to});
    const std::string depart = rng.pick(kDays);
    std::string ret = rng.pick(kDays);
    while (ret == depart) ret = rng.pick(kDays);
    if (rng.bernoulli(0.6)) free.push_back({{"on"}, "depart_date", depart});
    if (rng.bernoulli(0.35)) free.push_back({{"returning", "on"}, "return_date", ret});
    if (rng.bernoulli(0.3)) free.push_back({{"on"}, "airline", rng.pick(kAirlines)});
    if (rng.bernoulli(0.3)) free.push_back({{"in", "the"}, "depart_time", rng.pick(kTimes)});
    rng.shuffle(free);
    fixed.insert(fixed.end(), free.begin(), free.end());
    if (fixed.empty() && !has_type) continue;
    for (const auto& c : fixed) {
      for (const auto& w : c.lead) b.word(w);
      put_value(c.label, c.value);
    }
    out.push_back(std::move(b.utt));
  }
  return out;
}

// ---------------------------------------------------------------- JSONL

namespace {

using nlohmann::json;

json utterance_json(const TaggedUtterance& u) { return {{"tokens", u.tokens}, {"tags", u.tags}}; }

TaggedUtterance utterance_from(const json& j) {
  TaggedUtterance u;
  u.tokens = j.at("tokens").get<std::vector<std::string>>();
  u.tags = j.at("tags").get<std::vector<std::string>>();
  return u;
}

}  // namespace

void write_multiround(std::ostream& out, const MultiRoundCorpus& corpus) {
  for (const auto& s : corpus.samples) {
    json rounds = json::array();
    for (const auto& r : s.rounds) {
      json j = utterance_json(r.text);
      j["kind"] = std::string(to_string(r.kind));
      rounds.push_back(std::move(j));
    }
    json line{{"format", 1},
              {"origin", utterance_json(s.origin)},
              {"rounds", std::move(rounds)},
              {"gold_tables", s.gold_tables}};
    out << line.dump() << '\n';
  }
}

MultiRoundCorpus read_multiround(std::istream& in) {
  MultiRoundCorpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    MultiRoundSample s;
    try {
      const json j = json::parse(line);
      if (!j.contains("format") || j.at("format") != 1)
        throw FormatError(where + "unsupported or missing \"format\" (expected 1)");
      s.origin = utterance_from(j.at("origin"));
      for (const auto& r : j.at("rounds")) {
        FeedbackRound round;
        round.text = utterance_from(r);
        round.kind = parse_feedback_kind(r.at("kind").get<std::string>());
        s.rounds.push_back(std::move(round));
      }
      s.gold_tables = j.at("gold_tables").get<std::vector<SlotValues>>();
    } catch (const FormatError& e) {
      if (std::string_view(e.what()).starts_with("line ")) throw;
      throw FormatError(where + e.what());
    } catch (const json::exception& e) {
      throw FormatError(where + e.what());
    }
    try {
      validate_sample(s);
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
    corpus.samples.push_back(std::move(s));
  }
  return corpus;
}

MultiRoundCorpus read_multiround_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open corpus file " + path.string());
  return read_multiround(in);
}

void write_multiround_file(const std::filesystem::path& path, const MultiRoundCorpus& corpus) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write corpus file " + path.string());
  write_multiround(out, corpus);
  if (!out) throw InputError("failed writing corpus file " + path.string());
}

LabelSet labels_of(const MultiRoundCorpus& corpus) {
  std::vector<std::vector<std::string>> tags;
  for (const auto& s : corpus.samples) {
    tags.push_back(s.origin.tags);
    for (const auto& r : s.rounds) tags.push_back(r.text.tags);
  }
  return LabelSet::from_tags(tags);
}

Vocab vocab_of(const MultiRoundCorpus& corpus) {
  Vocab v;
  for (const auto& s : corpus.samples) {
    for (const auto& t : s.origin.tokens) v.add(t);
    for (const auto& r : s.rounds)
      for (const auto& t : r.text.tokens) v.add(t);
  }
  return v;
}

// ---------------------------------------------------------------- metrics

SlotScores slot_f1(const std::vector<SlotValues>& predicted, const std::vector<SlotValues>& gold) {
  if (predicted.size() != gold.size())
    throw InputError("slot_f1: " + std::to_string(predicted.size()) + " predictions for " +
                     std::to_string(gold.size()) + " gold tables");
  SlotScores s;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    s.predicted += predicted[i].size();
    s.gold += gold[i].size();
    for (const auto& [label, value] : predicted[i]) {
      auto it = gold[i].find(label);
      if (it != gold[i].end() && it->second == value) ++s.correct;
    }
  }
  s.precision = s.predicted ? static_cast<double>(s.correct) / static_cast<double>(s.predicted) : 0.0;
  s.recall = s.gold ? static_cast<double>(s.correct) / static_cast<double>(s.gold) : 0.0;
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

double sentence_accuracy(const std::vector<SlotValues>& predicted, const std::vector<SlotValues>& gold) {
  if (predicted.size() != gold.size())
    throw InputError("sentence_accuracy: " + std::to_string(predicted.size()) + " predictions for " +
                     std::to_string(gold.size()) + " gold tables");
  if (gold.empty()) return 0.0;
  std::size_t exact = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) exact += predicted[i] == gold[i];
  return static_cast<double>(exact) / static_cast<double>(gold.size());
}

}  // namespace mslu
