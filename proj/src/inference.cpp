#include "relmatch/inference.hpp"

#include <algorithm>
#include <map>

#include "relmatch/autodiff/ops.hpp"
#include "relmatch/error.hpp"
#include "relmatch/qq_matcher.hpp"
#include "relmatch/qr_matcher.hpp"
#include "relmatch/rng.hpp"
#include "relmatch/scoring.hpp"

namespace relmatch {

void rank_candidates(std::vector<ScoredCandidate>& candidates) {
  std::sort(candidates.begin(), candidates.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.f != b.f) return a.f > b.f;
    if (a.s1 != b.s1) return a.s1 > b.s1;
    return a.question < b.question;
  });
}

RelationId vote(std::span<const ScoredCandidate> ranked, std::size_t k) {
  if (ranked.empty()) throw Error("vote: no candidates");
  if (k == 0) throw Error("vote: k must be >= 1");
  const std::size_t top = std::min(k, ranked.size());
  struct Tally {
    std::size_t count = 0;
    std::size_t first_rank = 0;
  };
  std::map<RelationId, Tally> tally;
  for (std::size_t i = 0; i < top; ++i) {
    auto [it, inserted] = tally.try_emplace(ranked[i].relation, Tally{0, i});
    ++it->second.count;
  }
  auto best = tally.begin();
  for (auto it = tally.begin(); it != tally.end(); ++it) {
    if (it->second.count > best->second.count ||
        (it->second.count == best->second.count && it->second.first_rank < best->second.first_rank)) {
      best = it;
    }
  }
  return best->first;
}

std::vector<RelationId> candidate_relations(const QuestionInstance& q) {
  std::vector<RelationId> out = q.negatives;
  out.push_back(q.gold);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Predictor::Predictor(const RelationModel& model, std::span<const QuestionInstance> train, const QuestionPool& pools,
                     const RelationTable& relations)
    : model_(model), train_(train), pools_(pools), relations_(relations) {
  if (mode_traits(model.mode).question_relation) {
    relation_codes_.reserve(relations.size());
    for (const auto& label : relations.labels()) {
      ad::Tape tape(false);
      relation_codes_.push_back(encode_sequence(tape, label.words, model.embedding, model.qr.relation));
    }
  }
}

std::span<const TokenId> Predictor::candidate_tokens(const ScoredCandidate& c) const {
  if (c.question < train_.size()) return train_[c.question].tokens;
  return relations_.at(c.question - train_.size()).words;
}

std::vector<ScoredCandidate> Predictor::score_candidates(std::span<const TokenId> question,
                                                         std::span<const RelationId> candidates,
                                                         const InferenceConfig& cfg) const {
  std::vector<RelationId> rels;
  if (cfg.restrict_to_candidates) {
    rels.assign(candidates.begin(), candidates.end());
    std::sort(rels.begin(), rels.end());
    rels.erase(std::unique(rels.begin(), rels.end()), rels.end());
  } else {
    rels.resize(relations_.size());
    for (RelationId r = 0; r < relations_.size(); ++r) rels[r] = r;
  }
  if (rels.empty()) throw Error("score_candidates: empty candidate set");

  const auto query = clip_tokens(question, model_.config);
  if (query.empty()) throw Error("score_candidates: empty question");
  const ChannelMask mask = channel_mask(model_.mode);
  ad::Tensor query_code;
  if (!relation_codes_.empty()) {
    ad::Tape tape(false);
    query_code = encode_sequence(tape, query, model_.embedding, model_.qr.question);
  }

  std::vector<ScoredCandidate> scored;
  for (RelationId r : rels) {
    if (r >= relations_.size()) throw Error("score_candidates: unknown relation id " + std::to_string(r));
    std::vector<std::size_t> members;
    if (const auto* pool = pools_.find(r)) {
      if (cfg.pool_cap > 0 && pool->size() > cfg.pool_cap) {
        Rng rng(derive_seed(cfg.seed, {r, 0xca9ULL}));
        for (std::size_t pick : rng.sample_distinct(pool->size(), cfg.pool_cap)) members.push_back((*pool)[pick]);
        std::sort(members.begin(), members.end());
      } else {
        members = *pool;
      }
      if (cfg.exclude_question) std::erase(members, *cfg.exclude_question);
    }

    double s2 = 0.0;
    if (!relation_codes_.empty()) {
      ad::Tape tape(false);
      s2 = ad::cosine_similarity(tape, query_code, relation_codes_[r]).item();
    }
    auto add = [&](std::size_t index, std::span<const TokenId> tokens) {
      ad::Tape tape(false);
      const double s1 = score_qq(tape, query, tokens, model_.embedding, model_.qq, model_.config, mask).item();
      scored.push_back({index, r, s1, s2, combine_scores(s1, s2, model_.combiner)});
    };
    if (members.empty()) {
      add(synthetic_index(r), relations_.at(r).words);
    } else {
      for (std::size_t idx : members) add(idx, train_[idx].tokens);
    }
  }
  rank_candidates(scored);
  return scored;
}

Prediction Predictor::predict(std::span<const TokenId> question, std::span<const RelationId> candidates,
                              const InferenceConfig& cfg) const {
  if (cfg.k == 0) throw Error("predict: k must be >= 1");
  auto scored = score_candidates(question, candidates, cfg);
  Prediction p;
  p.relation = vote(scored, cfg.k);
  scored.resize(std::min(cfg.k, scored.size()));
  p.top = std::move(scored);
  return p;
}

}  // namespace relmatch
