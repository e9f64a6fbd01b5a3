#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "relmatch/autodiff/adagrad.hpp"
#include "relmatch/autodiff/tensor.hpp"
#include "relmatch/embedding.hpp"

namespace relmatch {

/// Which channels and sub-networks contribute to the final score.
enum class MatchMode {
  two_channel,    // Q'-Q with cosine + indicator channels, Q'-R disabled
  semantic_only,  // Q'-Q cosine channel only
  lexical_only,   // Q'-Q indicator channel only
  qq_only,        // alias of two_channel kept for the network ablation
  qq_qr,          // full model
};

std::string_view mode_name(MatchMode mode);
/// Throws Error for unknown names.
MatchMode parse_mode(std::string_view name);

struct ModeTraits {
  bool cosine_channel;
  bool indicator_channel;
  bool question_relation;
};
ModeTraits mode_traits(MatchMode mode);

struct ModelConfig {
  std::size_t embed_dim = 300;
  std::size_t lstm_hidden = 64;
  std::size_t kernels = 16;
  std::size_t kernel_size = 3;
  std::size_t pool = 4;
  std::size_t mlp_hidden = 256;
  std::size_t max_len = 20;

  std::size_t matching_dim() const { return kernels * pool * pool; }
  std::size_t encoding_dim() const { return 2 * lstm_hidden; }

  std::vector<std::pair<std::string, std::string>> to_pairs() const;
  /// Reads the keys written by to_pairs(); missing keys keep defaults.
  static ModelConfig from_map(const std::map<std::string, std::string>& values);
};

/// Conv kernels [n,2,s,s] and biases, then the MLP producing S1.
struct QQParams {
  ad::Tensor kernels;
  ad::Tensor kernel_bias;
  ad::Tensor w1;  // [matching_dim, mlp_hidden]
  ad::Tensor b1;  // [mlp_hidden]
  ad::Tensor w2;  // [mlp_hidden, 1]
  ad::Tensor b2;  // [1]
};

struct LstmParams {
  ad::Tensor weight;  // [embed_dim + hidden, 4*hidden]
  ad::Tensor bias;    // [4*hidden]
};

struct BiLstmParams {
  LstmParams forward;
  LstmParams backward;
};

/// Untied question and relation encoders.
struct QRParams {
  BiLstmParams question;
  BiLstmParams relation;
};

/// F = w1*S1 + w2*S2 + bias
struct CombinerParams {
  ad::Tensor w1;
  ad::Tensor w2;
  ad::Tensor bias;
};

struct RelationModel {
  ModelConfig config;
  MatchMode mode = MatchMode::qq_qr;
  EmbeddingMatrix embedding;
  QQParams qq;
  QRParams qr;
  CombinerParams combiner;

  /// Xavier-uniform weights, zero biases, w1 = w2 = 0.5 (w2 = 0 when the
  /// mode disables the question-relation network).
  static RelationModel create(const ModelConfig& config, MatchMode mode, EmbeddingMatrix embedding,
                              std::uint64_t seed);

  /// Every tensor, in checkpoint order.
  std::vector<ad::NamedParam> named_params() const;
  /// The tensors the optimizer updates under the current mode.
  std::vector<ad::NamedParam> trainable_params() const;

  /// Deep copy: parameters are not shared with the source.
  RelationModel clone() const;
};

}  // namespace relmatch
