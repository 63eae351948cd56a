#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mslu {

inline constexpr std::string_view kOutsideLabel = "O";

// Slot label types, "O" first. Index i <-> label is a bijection. The IOB tag
// alphabet derived from it is: 0 = O, 2i-1 = B-label_i, 2i = I-label_i.
class LabelSet {
 public:
  LabelSet() : labels_{std::string(kOutsideLabel)} { index_.emplace(labels_[0], 0); }
  explicit LabelSet(const std::vector<std::string>& slot_labels);

  // Deduplicated label types of a tag alphabet, in first-seen order.
  static LabelSet from_tags(const std::vector<std::vector<std::string>>& tag_sequences);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::string& label(std::size_t i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::optional<std::size_t> find(std::string_view label) const;
  // Throws VocabularyError for an unknown label.
  std::size_t index(std::string_view label) const;

  std::size_t tag_count() const noexcept { return 2 * labels_.size() - 1; }
  std::size_t tag_index(std::string_view tag) const;
  std::string tag_name(std::size_t tag) const;
  // Label index carried by a tag index (0 for O).
  static std::size_t tag_label(std::size_t tag) noexcept { return (tag + 1) / 2; }
  static bool tag_is_begin(std::size_t tag) noexcept { return tag % 2 == 1; }

  friend bool operator==(const LabelSet& a, const LabelSet& b) { return a.labels_ == b.labels_; }

 private:
  void add(std::string label);
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Token vocabulary; id 0 is the shared unknown-token row.
class Vocab {
 public:
  Vocab() : tokens_{"<unk>"} {}
  explicit Vocab(const std::vector<std::string>& tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t id(const std::string& token) const;
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  void add(const std::string& token);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

struct TaggedUtterance {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;

  friend bool operator==(const TaggedUtterance&, const TaggedUtterance&) = default;
};

struct SlotSpan {
  std::string label;
  std::size_t begin = 0;  // first token
  std::size_t end = 0;    // one past the last token

  friend bool operator==(const SlotSpan&, const SlotSpan&) = default;
};

// label -> surface value. Used for gold tables, predictions and metrics.
using SlotValues = std::map<std::string, std::string>;

// Splits "B-x"/"I-x"/"O" into (prefix, label); throws VocabularyError on any
// other shape.
std::pair<char, std::string> split_tag(std::string_view tag);

// Every index whose I-X tag lacks a B-X or I-X predecessor. With a label set,
// tags naming unknown labels raise VocabularyError.
std::vector<std::size_t> validate_iob(const std::vector<std::string>& tags, const LabelSet* labels = nullptr);

// Spans of a valid IOB sequence, in order.
std::vector<SlotSpan> extract_spans(const std::vector<std::string>& tags);
std::string span_text(const std::vector<std::string>& tokens, const SlotSpan& span);
// Label -> text of its last span.
SlotValues slot_values(const TaggedUtterance& utterance);

// Lowercases and splits on whitespace, dropping ASCII punctuation.
std::vector<std::string> tokenize(std::string_view text);
std::string join_tokens(const std::vector<std::string>& tokens);

struct AtisCorpus {
  std::vector<TaggedUtterance> utterances;
  LabelSet labels;
};

// `token<TAB>tag` per line, blank line between utterances.
AtisCorpus parse_atis(std::istream& in);
AtisCorpus parse_atis_file(const std::filesystem::path& path);
std::string serialize_atis(const std::vector<TaggedUtterance>& utterances);

enum class FeedbackKind { Add, Update };
std::string_view to_string(FeedbackKind kind);
FeedbackKind parse_feedback_kind(std::string_view text);

struct FeedbackRound {
  TaggedUtterance text;
  FeedbackKind kind = FeedbackKind::Add;

  friend bool operator==(const FeedbackRound&, const FeedbackRound&) = default;
};

// origin + 1..4 feedback rounds; gold_tables[0] is the origin's table and
// gold_tables[t] the expected table after round t.
struct MultiRoundSample {
  TaggedUtterance origin;
  std::vector<FeedbackRound> rounds;
  std::vector<SlotValues> gold_tables;

  friend bool operator==(const MultiRoundSample&, const MultiRoundSample&) = default;
};

// Labels changed or introduced by round t (t >= 1), or all labels at t = 0.
std::vector<std::string> gold_delta(const MultiRoundSample& sample, std::size_t round);

// Throws ValidationError when the structural invariants do not hold.
void validate_sample(const MultiRoundSample& sample);

// Slot values seen per label; the UPDATE generator draws replacements here.
class SlotLexicon {
 public:
  static SlotLexicon from_utterances(const std::vector<TaggedUtterance>& utterances);
  void add(const std::string& label, const std::string& value);
  const std::vector<std::string>& values(const std::string& label) const;

 private:
  std::map<std::string, std::vector<std::string>> values_;
};

struct SynthesisOptions {
  // Kind of round 1; unset means drawn like every other round.
  std::optional<FeedbackKind> first_round_kind;
  // Chance that an ADD round supplies two withheld slots at once.
  double double_add_probability = 0.25;
};

MultiRoundSample synthesize_multiround(const TaggedUtterance& single_turn, const SlotLexicon& lexicon,
                                       std::uint64_t seed, std::size_t rounds, const SynthesisOptions& options = {});

// Built-in flight-booking domain: 7 slot labels plus O, a 50-word vocabulary.
std::vector<std::string> flight_slot_labels();
std::vector<TaggedUtterance> generate_flight_queries(std::uint64_t seed, std::size_t count);

struct MultiRoundCorpus {
  std::vector<MultiRoundSample> samples;
};

// Line-delimited JSON, one sample per line, each carrying "format": 1.
void write_multiround(std::ostream& out, const MultiRoundCorpus& corpus);
MultiRoundCorpus read_multiround(std::istream& in);
MultiRoundCorpus read_multiround_file(const std::filesystem::path& path);
void write_multiround_file(const std::filesystem::path& path, const MultiRoundCorpus& corpus);

LabelSet labels_of(const MultiRoundCorpus& corpus);
Vocab vocab_of(const MultiRoundCorpus& corpus);

struct SlotScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t correct = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
};

// Micro-averaged exact (label, value) match.
SlotScores slot_f1(const std::vector<SlotValues>& predicted, const std::vector<SlotValues>& gold);
double sentence_accuracy(const std::vector<SlotValues>& predicted, const std::vector<SlotValues>& gold);

}  // namespace mslu
