#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mslu/model.hpp"
#include "mslu/slot_table.hpp"

namespace mslu {

// Where a round's mask comes from: the policy, or "keep every candidate"
// (the no-policy baseline).
enum class MaskSource { Policy, KeepAll };

// Tags the query, or the query followed by one round of feedback.
TaggedUtterance tag_round(const Model& model, const std::vector<std::string>& query,
                          const std::vector<std::string>* feedback = nullptr);
SlotCandidates round_candidates(const Model& model, const TaggedUtterance& tagged);

struct RoundResult {
  std::size_t round = 0;
  TaggedUtterance tagged;
  SlotCandidates candidates;
  Mask mask;
  double log_prob = 0.0;  // 0 for round 0 and for KeepAll
  Tensor masked;
  SlotFillingTable table;
};

// One origin query followed by feedback rounds:
//   round 0: tag the query, keep every candidate, fill the table;
//   round t: encode the feedback, advance the policy, tag query ++ feedback,
//            mask the candidates and update the table.
class Rollout {
 public:
  explicit Rollout(const Model& model, MaskSource source = MaskSource::Policy, MaskMode mode = MaskMode::Greedy,
                   std::uint64_t seed = 0);

  const RoundResult& start(const std::vector<std::string>& query);
  const RoundResult& feedback(const std::vector<std::string>& tokens);

  bool started() const noexcept { return !history_.empty(); }
  // Feedback rounds applied so far.
  std::size_t rounds() const noexcept { return history_.empty() ? 0 : history_.size() - 1; }
  const SlotFillingTable& table() const;
  const std::vector<RoundResult>& history() const noexcept { return history_; }
  const Tensor& query_feature() const noexcept { return c_q_; }
  const MaskState& mask_state() const noexcept { return state_; }

 private:
  const Model* model_;
  MaskSource source_;
  MaskMode mode_;
  std::uint64_t seed_;
  std::vector<std::string> query_;
  Tensor c_q_;
  MaskState state_;
  std::vector<RoundResult> history_;
};

}  // namespace mslu
