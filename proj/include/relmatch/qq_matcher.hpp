#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "relmatch/autodiff/tape.hpp"
#include "relmatch/embedding.hpp"
#include "relmatch/model.hpp"
#include "relmatch/vocab.hpp"

namespace relmatch {

/// Cosine and indicator interaction matrices of two questions, stored in a
/// fixed max_len x max_len frame. Cells beyond the true lengths are zero.
struct InteractionChannels {
  std::size_t max_len = 0;
  std::size_t len_a = 0;
  std::size_t len_b = 0;
  std::vector<double> cosine;
  std::vector<double> indicator;

  double cosine_at(std::size_t i, std::size_t j) const { return cosine[i * max_len + j]; }
  double indicator_at(std::size_t i, std::size_t j) const { return indicator[i * max_len + j]; }
};

/// Rows follow `a`, columns follow `b`; both are truncated to max_len.
InteractionChannels build_interaction_channels(std::span<const TokenId> a, std::span<const TokenId> b,
                                               const EmbeddingMatrix& emb, std::size_t max_len);

struct ChannelMask {
  bool cosine = true;
  bool indicator = true;
};

/// Truncates to max_len and right-pads with <pad> up to min_len.
std::vector<TokenId> fit_length(std::span<const TokenId> tokens, std::size_t max_len, std::size_t min_len);

/// Constant [2,H,W] conv input from the true-length region of `channels`,
/// zero-padded so that H, W >= kernel_size.
ad::Tensor channels_tensor(const InteractionChannels& channels, std::size_t kernel_size,
                           ChannelMask mask = {});

/// Differentiable [2,H,W] conv input: the cosine channel is built from the
/// embedding table so gradients reach it.
ad::Tensor interaction_tensor(ad::Tape& tape, std::span<const TokenId> a, std::span<const TokenId> b,
                              const EmbeddingMatrix& emb, const ModelConfig& config, ChannelMask mask = {});

/// S1 = sigmoid(W2 relu(W1 V + b1) + b2), V = flattened dynamic max-pool of
/// relu(conv(channels) + b). Returns a [1,1] tensor.
ad::Tensor forward_qq(ad::Tape& tape, const ad::Tensor& channels, const QQParams& params,
                      const ModelConfig& config);

double forward_qq(const InteractionChannels& channels, const QQParams& params, const ModelConfig& config,
                  ChannelMask mask = {});

/// Tokens to S1 in one call.
ad::Tensor score_qq(ad::Tape& tape, std::span<const TokenId> a, std::span<const TokenId> b,
                    const EmbeddingMatrix& emb, const QQParams& params, const ModelConfig& config,
                    ChannelMask mask = {});

ChannelMask channel_mask(MatchMode mode);

}  // namespace relmatch
