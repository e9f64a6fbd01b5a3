#pragma once

#include <span>
#include <vector>

#include "relmatch/autodiff/tape.hpp"
#include "relmatch/model.hpp"
#include "relmatch/vocab.hpp"

namespace relmatch {

/// F = w1*S1 + w2*S2 + b_c, as a [1] tensor.
ad::Tensor combine_scores(ad::Tape& tape, const ad::Tensor& s1, const ad::Tensor& s2, const CombinerParams& c);
double combine_scores(double s1, double s2, const CombinerParams& c);

/// mean over negatives of max(0, margin - f_pos + f_neg). Throws on an empty
/// negative list.
ad::Tensor ranking_loss(ad::Tape& tape, const ad::Tensor& f_pos, std::span<const ad::Tensor> f_negs,
                        double margin);
double ranking_loss(double f_pos, std::span<const double> f_negs, double margin);

/// Truncates a question to the model's max length.
std::span<const TokenId> clip_tokens(std::span<const TokenId> tokens, const ModelConfig& config);

/// Scores pairs against one query question (Q'), caching its encoding and
/// the relation encodings it has already seen on the same tape.
class QueryScorer {
 public:
  QueryScorer(ad::Tape& tape, const RelationModel& model, std::span<const TokenId> query);

  ad::Tensor s1(std::span<const TokenId> other);
  /// S2 against a relation word sequence; zero when the mode disables Q'-R.
  ad::Tensor s2(std::size_t relation_key, std::span<const TokenId> relation_words);
  ad::Tensor f(const ad::Tensor& s1, const ad::Tensor& s2);

 private:
  ad::Tape& tape_;
  const RelationModel& model_;
  std::span<const TokenId> query_;
  ad::Tensor query_code_;
  std::vector<std::pair<std::size_t, ad::Tensor>> relation_codes_;
};

}  // namespace relmatch
