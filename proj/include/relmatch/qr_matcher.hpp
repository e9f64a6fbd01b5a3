#pragma once

#include <span>

#include "relmatch/autodiff/tape.hpp"
#include "relmatch/embedding.hpp"
#include "relmatch/model.hpp"
#include "relmatch/vocab.hpp"

namespace relmatch {

/// BiLSTM over the token embeddings; per-step hidden states are
/// concat(forward, backward) and the sequence vector is their element-wise
/// max over time. Returns [1, 2*hidden].
ad::Tensor encode_sequence(ad::Tape& tape, std::span<const TokenId> tokens, const EmbeddingMatrix& emb,
                           const BiLstmParams& encoder);

/// S2 = cosine(h_question, h_relation), [1,1].
ad::Tensor forward_qr(ad::Tape& tape, std::span<const TokenId> question, std::span<const TokenId> relation_words,
                      const EmbeddingMatrix& emb, const QRParams& params);

double forward_qr(std::span<const TokenId> question, std::span<const TokenId> relation_words,
                  const EmbeddingMatrix& emb, const QRParams& params);

}  // namespace relmatch
