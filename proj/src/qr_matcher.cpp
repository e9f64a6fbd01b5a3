#include "relmatch/qr_matcher.hpp"

#include <tuple>
#include <vector>

#include "relmatch/autodiff/ops.hpp"
#include "relmatch/error.hpp"

namespace relmatch {

ad::Tensor encode_sequence(ad::Tape& tape, std::span<const TokenId> tokens, const EmbeddingMatrix& emb,
                           const BiLstmParams& encoder) {
  if (tokens.empty()) throw Error("encode_sequence: empty sequence");
  const std::size_t T = tokens.size();
  const std::size_t H = encoder.forward.bias.numel() / 4;

  std::vector<ad::Tensor> inputs;
  inputs.reserve(T);
  for (TokenId id : tokens) inputs.push_back(ad::embedding_gather(tape, emb.table, std::span(&id, 1), kPadId));

  auto run = [&](const LstmParams& p, bool reverse) {
    std::vector<ad::Tensor> states(T);
    ad::Tensor h = ad::Tensor::zeros({1, H});
    ad::Tensor c = ad::Tensor::zeros({1, H});
    for (std::size_t step = 0; step < T; ++step) {
      const std::size_t t = reverse ? T - 1 - step : step;
      std::tie(h, c) = ad::lstm_cell(tape, inputs[t], h, c, p.weight, p.bias);
      states[t] = h;
    }
    return states;
  };
  const auto fwd = run(encoder.forward, false);
  const auto bwd = run(encoder.backward, true);

  std::vector<ad::Tensor> steps;
  steps.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    const ad::Tensor pair[] = {fwd[t], bwd[t]};
    steps.push_back(ad::concat(tape, pair, 1));
  }
  ad::Tensor all = ad::concat(tape, steps, 0);
  return ad::dynamic_maxpool2d(tape, all, 1, 2 * H);
}

ad::Tensor forward_qr(ad::Tape& tape, std::span<const TokenId> question, std::span<const TokenId> relation_words,
                      const EmbeddingMatrix& emb, const QRParams& params) {
  ad::Tensor hq = encode_sequence(tape, question, emb, params.question);
  ad::Tensor hr = encode_sequence(tape, relation_words, emb, params.relation);
  return ad::cosine_similarity(tape, hq, hr);
}

double forward_qr(std::span<const TokenId> question, std::span<const TokenId> relation_words,
                  const EmbeddingMatrix& emb, const QRParams& params) {
  ad::Tape tape(false);
  return forward_qr(tape, question, relation_words, emb, params).item();
}

}  // namespace relmatch
