#include "relmatch/qq_matcher.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "relmatch/autodiff/ops.hpp"
#include "relmatch/error.hpp"

namespace relmatch {
namespace {

double row_norm(std::span<const double> table, std::size_t dim, TokenId id) {
  double s = 0.0;
  for (std::size_t k = 0; k < dim; ++k) s += table[id * dim + k] * table[id * dim + k];
  return std::sqrt(s);
}

ad::Tensor indicator_matrix(std::span<const TokenId> a, std::span<const TokenId> b) {
  ad::Tensor ind = ad::Tensor::zeros({a.size(), b.size()});
  auto v = ind.data();
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) v[i * b.size() + j] = (a[i] == b[j] && a[i] != kPadId) ? 1.0 : 0.0;
  return ind;
}

}  // namespace

ChannelMask channel_mask(MatchMode mode) {
  const ModeTraits t = mode_traits(mode);
  return {t.cosine_channel, t.indicator_channel};
}

std::vector<TokenId> fit_length(std::span<const TokenId> tokens, std::size_t max_len, std::size_t min_len) {
  std::vector<TokenId> out(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(std::min(tokens.size(), max_len)));
  if (out.size() < min_len) {
    spdlog::debug("qq: padding {}-token question up to kernel size {}", out.size(), min_len);
    out.resize(min_len, kPadId);
  }
  return out;
}

InteractionChannels build_interaction_channels(std::span<const TokenId> a, std::span<const TokenId> b,
                                               const EmbeddingMatrix& emb, std::size_t max_len) {
  if (a.empty() || b.empty()) throw Error("interaction channels: empty token sequence");
  InteractionChannels ch;
  ch.max_len = max_len;
  ch.len_a = std::min(a.size(), max_len);
  ch.len_b = std::min(b.size(), max_len);
  ch.cosine.assign(max_len * max_len, 0.0);
  ch.indicator.assign(max_len * max_len, 0.0);
  const std::size_t d = emb.dim();
  auto table = emb.table.data();
  for (std::size_t i = 0; i < ch.len_a; ++i) {
    const double na = row_norm(table, d, a[i]);
    for (std::size_t j = 0; j < ch.len_b; ++j) {
      const double nb = row_norm(table, d, b[j]);
      double cos = 0.0;
      if (na == 0.0 || nb == 0.0) {
        spdlog::debug("interaction channels: zero-norm embedding, cosine set to 0");
      } else {
        double dot = 0.0;
        for (std::size_t k = 0; k < d; ++k) dot += table[a[i] * d + k] * table[b[j] * d + k];
        cos = std::clamp(dot / (na * nb), -1.0, 1.0);
      }
      ch.cosine[i * max_len + j] = cos;
      ch.indicator[i * max_len + j] = (a[i] == b[j] && a[i] != kPadId) ? 1.0 : 0.0;
    }
  }
  return ch;
}

ad::Tensor channels_tensor(const InteractionChannels& channels, std::size_t kernel_size, ChannelMask mask) {
  const std::size_t H = std::max(channels.len_a, kernel_size);
  const std::size_t W = std::max(channels.len_b, kernel_size);
  ad::Tensor x = ad::Tensor::zeros({2, H, W});
  auto v = x.data();
  for (std::size_t i = 0; i < channels.len_a; ++i)
    for (std::size_t j = 0; j < channels.len_b; ++j) {
      if (mask.cosine) v[i * W + j] = channels.cosine_at(i, j);
      if (mask.indicator) v[H * W + i * W + j] = channels.indicator_at(i, j);
    }
  return x;
}

ad::Tensor interaction_tensor(ad::Tape& tape, std::span<const TokenId> a, std::span<const TokenId> b,
                              const EmbeddingMatrix& emb, const ModelConfig& config, ChannelMask mask) {
  if (a.empty() || b.empty()) throw Error("interaction channels: empty token sequence");
  const auto ids_a = fit_length(a, config.max_len, config.kernel_size);
  const auto ids_b = fit_length(b, config.max_len, config.kernel_size);
  const std::size_t H = ids_a.size(), W = ids_b.size();
  ad::Tensor cosine;
  if (mask.cosine) {
    ad::Tensor ea = ad::embedding_gather(tape, emb.table, ids_a, kPadId);
    ad::Tensor eb = ad::embedding_gather(tape, emb.table, ids_b, kPadId);
    cosine = ad::cosine_similarity(tape, ea, eb);
  } else {
    cosine = ad::Tensor::zeros({H, W});
  }
  ad::Tensor indicator = mask.indicator ? indicator_matrix(ids_a, ids_b) : ad::Tensor::zeros({H, W});
  const ad::Tensor parts[] = {cosine, indicator};
  return ad::reshape(tape, ad::concat(tape, parts, 0), {2, H, W});
}

ad::Tensor forward_qq(ad::Tape& tape, const ad::Tensor& channels, const QQParams& params,
                      const ModelConfig& config) {
  ad::Tensor features = ad::relu(tape, ad::conv2d(tape, channels, params.kernels, params.kernel_bias));
  ad::Tensor pooled = ad::dynamic_maxpool2d(tape, features, config.pool, config.pool);
  ad::Tensor matching = ad::reshape(tape, pooled, {1, pooled.numel()});
  ad::Tensor hidden = ad::relu(tape, ad::add(tape, ad::matmul(tape, matching, params.w1), params.b1));
  return ad::sigmoid(tape, ad::add(tape, ad::matmul(tape, hidden, params.w2), params.b2));
}

double forward_qq(const InteractionChannels& channels, const QQParams& params, const ModelConfig& config,
                  ChannelMask mask) {
  ad::Tape tape(false);
  return forward_qq(tape, channels_tensor(channels, config.kernel_size, mask), params, config).item();
}

ad::Tensor score_qq(ad::Tape& tape, std::span<const TokenId> a, std::span<const TokenId> b,
                    const EmbeddingMatrix& emb, const QQParams& params, const ModelConfig& config,
                    ChannelMask mask) {
  return forward_qq(tape, interaction_tensor(tape, a, b, emb, config, mask), params, config);
}

}  // namespace relmatch
