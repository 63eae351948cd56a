#include "mslu/pipeline.hpp"

#include "mslu/errors.hpp"

namespace mslu {

TaggedUtterance tag_round(const Model& model, const std::vector<std::string>& query,
                          const std::vector<std::string>* feedback) {
  TaggedUtterance u;
  u.tokens = query;
  if (feedback) u.tokens.insert(u.tokens.end(), feedback->begin(), feedback->end());
  if (u.tokens.empty()) throw InputError("nothing to tag");
  u.tags = model.tagger.decode(model.tagger_params, token_ids(model.vocab, u.tokens), model.labels);
  return u;
}

SlotCandidates round_candidates(const Model& model, const TaggedUtterance& tagged) {
  return build_slot_candidates(tagged, token_ids(model.vocab, tagged.tokens),
                               model.tagger_params[model.tagger.embedding], model.labels);
}

Rollout::Rollout(const Model& model, MaskSource source, MaskMode mode, std::uint64_t seed)
    : model_(&model), source_(source), mode_(mode), seed_(seed) {}

const SlotFillingTable& Rollout::table() const {
  if (history_.empty()) throw ConflictError("no query has been parsed yet");
  return history_.back().table;
}

const RoundResult& Rollout::start(const std::vector<std::string>& query) {
  if (started()) throw ConflictError("the query has already been parsed");
  if (query.empty()) throw InputError("empty query");
  query_ = query;
  c_q_ = model_->query_encoder.encode(model_->query_params, token_ids(model_->vocab, query));

  RoundResult r;
  r.round = 0;
  r.tagged = tag_round(*model_, query);
  r.candidates = round_candidates(*model_, r.tagged);
  r.mask = r.candidates.presence();
  r.masked = mask_candidates(r.mask, r.candidates.matrix);
  r.table = update_table(SlotFillingTable(model_->k()), r.masked, r.candidates.values, 0);
  state_ = model_->policy.initial_state(r.mask);
  history_.push_back(std::move(r));
  return history_.back();
}

const RoundResult& Rollout::feedback(const std::vector<std::string>& tokens) {
  if (!started()) throw ConflictError("feedback before the query");
  if (tokens.empty()) throw InputError("empty feedback");
  RoundResult r;
  r.round = history_.size();
  r.tagged = tag_round(*model_, query_, &tokens);
  r.candidates = round_candidates(*model_, r.tagged);
  if (source_ == MaskSource::KeepAll) {
    r.mask = Mask(model_->k(), 1);
  } else {
    const Tensor c_f = model_->feedback_encoder.encode(model_->feedback_params, token_ids(model_->vocab, tokens));
    PolicyDecision d = policy_step(model_->policy, model_->policy_params, c_q_, c_f, state_, mode_,
                                   mix_seed(seed_, r.round));
    r.mask = d.state.s;
    r.log_prob = d.log_prob;
    state_ = std::move(d.state);
  }
  r.masked = mask_candidates(r.mask, r.candidates.matrix);
  r.table = update_table(history_.back().table, r.masked, r.candidates.values, r.round);
  history_.push_back(std::move(r));
  return history_.back();
}

}  // namespace mslu
