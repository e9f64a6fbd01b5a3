#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "relmatch/autodiff/tensor.hpp"
#include "relmatch/dataset.hpp"
#include "relmatch/model.hpp"

namespace relmatch {

struct ScoredCandidate {
  /// Train index, or train_size + relation id for a synthetic relation-word
  /// question.
  std::size_t question = 0;
  RelationId relation = 0;
  double s1 = 0.0;
  double s2 = 0.0;
  double f = 0.0;
};

struct InferenceConfig {
  std::size_t k = 5;
  bool restrict_to_candidates = true;
  /// Per-relation pool subsample size; 0 scores every pooled question.
  std::size_t pool_cap = 0;
  std::uint64_t seed = 0;
  /// Train index to leave out of the pools (leave-one-out scoring).
  std::optional<std::size_t> exclude_question;
};

/// Sorts by F desc, then S1 desc, then question index asc.
void rank_candidates(std::vector<ScoredCandidate>& candidates);

/// Majority relation among the first min(k, n) ranked candidates. Count ties
/// go to the relation whose best member ranks highest, so the vote depends on
/// the ranking only.
RelationId vote(std::span<const ScoredCandidate> ranked, std::size_t k);

struct Prediction {
  RelationId relation = 0;
  std::vector<ScoredCandidate> top;
};

/// Frozen-model scorer over the question pools. Relation encodings are
/// computed once at construction. Safe for concurrent const use.
class Predictor {
 public:
  Predictor(const RelationModel& model, std::span<const QuestionInstance> train, const QuestionPool& pools,
            const RelationTable& relations);

  std::vector<ScoredCandidate> score_candidates(std::span<const TokenId> question,
                                                std::span<const RelationId> candidates,
                                                const InferenceConfig& cfg) const;
  Prediction predict(std::span<const TokenId> question, std::span<const RelationId> candidates,
                     const InferenceConfig& cfg) const;
  RelationId predict_relation(std::span<const TokenId> question, std::span<const RelationId> candidates,
                              const InferenceConfig& cfg) const {
    return predict(question, candidates, cfg).relation;
  }

  std::size_t synthetic_index(RelationId r) const { return train_.size() + r; }
  std::span<const TokenId> candidate_tokens(const ScoredCandidate& c) const;

 private:
  const RelationModel& model_;
  std::span<const QuestionInstance> train_;
  const QuestionPool& pools_;
  const RelationTable& relations_;
  std::vector<ad::Tensor> relation_codes_;
};

/// Candidate set of a benchmark sample: gold plus negatives, sorted.
std::vector<RelationId> candidate_relations(const QuestionInstance& q);

}  // namespace relmatch
