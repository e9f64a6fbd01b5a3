#include "relmatch/scoring.hpp"

#include <algorithm>

#include "relmatch/autodiff/ops.hpp"
#include "relmatch/error.hpp"
#include "relmatch/qq_matcher.hpp"
#include "relmatch/qr_matcher.hpp"

namespace relmatch {

ad::Tensor combine_scores(ad::Tape& tape, const ad::Tensor& s1, const ad::Tensor& s2, const CombinerParams& c) {
  const ad::Tensor weights[] = {c.w1, c.w2};
  const ad::Tensor scores[] = {s1, s2};
  return ad::affine_combine(tape, weights, scores, c.bias);
}

double combine_scores(double s1, double s2, const CombinerParams& c) {
  // Same accumulation order as affine_combine.
  double f = 0.0;
  f += c.w1.item() * s1;
  f += c.w2.item() * s2;
  f += c.bias.item();
  return f;
}

ad::Tensor ranking_loss(ad::Tape& tape, const ad::Tensor& f_pos, std::span<const ad::Tensor> f_negs, double margin) {
  if (f_negs.empty()) throw Error("ranking_loss: no negatives");
  const ad::Tensor unit_weights[] = {ad::Tensor::scalar(1.0), ad::Tensor::scalar(-1.0)};
  const ad::Tensor margin_t = ad::Tensor::scalar(margin);
  std::vector<ad::Tensor> hinges;
  hinges.reserve(f_negs.size());
  for (const ad::Tensor& neg : f_negs) {
    const ad::Tensor pair[] = {neg, f_pos};
    hinges.push_back(ad::relu(tape, ad::affine_combine(tape, unit_weights, pair, margin_t)));
  }
  const std::vector<ad::Tensor> mean_weights(f_negs.size(), ad::Tensor::scalar(1.0 / static_cast<double>(f_negs.size())));
  return ad::affine_combine(tape, mean_weights, hinges, ad::Tensor::scalar(0.0));
}

double ranking_loss(double f_pos, std::span<const double> f_negs, double margin) {
  if (f_negs.empty()) throw Error("ranking_loss: no negatives");
  const double w = 1.0 / static_cast<double>(f_negs.size());
  double loss = 0.0;
  for (double neg : f_negs) {
    double d = 0.0;
    d += 1.0 * neg;
    d += -1.0 * f_pos;
    d += margin;
    loss += w * (d > 0.0 ? d : 0.0);
  }
  return loss + 0.0;
}

std::span<const TokenId> clip_tokens(std::span<const TokenId> tokens, const ModelConfig& config) {
  return tokens.first(std::min(tokens.size(), config.max_len));
}

QueryScorer::QueryScorer(ad::Tape& tape, const RelationModel& model, std::span<const TokenId> query)
    : tape_(tape), model_(model), query_(clip_tokens(query, model.config)) {
  if (query_.empty()) throw Error("query scorer: empty question");
  if (mode_traits(model.mode).question_relation) {
    query_code_ = encode_sequence(tape_, query_, model_.embedding, model_.qr.question);
  }
}

ad::Tensor QueryScorer::s1(std::span<const TokenId> other) {
  return score_qq(tape_, query_, other, model_.embedding, model_.qq, model_.config, channel_mask(model_.mode));
}

ad::Tensor QueryScorer::s2(std::size_t relation_key, std::span<const TokenId> relation_words) {
  if (!query_code_.defined()) return ad::Tensor::zeros({1, 1});
  auto it = std::find_if(relation_codes_.begin(), relation_codes_.end(),
                         [&](const auto& entry) { return entry.first == relation_key; });
  if (it == relation_codes_.end()) {
    relation_codes_.emplace_back(relation_key,
                                 encode_sequence(tape_, relation_words, model_.embedding, model_.qr.relation));
    it = std::prev(relation_codes_.end());
  }
  return ad::cosine_similarity(tape_, query_code_, it->second);
}

ad::Tensor QueryScorer::f(const ad::Tensor& s1, const ad::Tensor& s2) {
  return combine_scores(tape_, s1, s2, model_.combiner);
}

}  // namespace relmatch
