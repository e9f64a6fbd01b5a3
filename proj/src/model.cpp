#include "relmatch/model.hpp"

#include <cmath>
#include <stdexcept>

#include "relmatch/error.hpp"
#include "relmatch/rng.hpp"

namespace relmatch {
namespace {

ad::Tensor xavier(const std::string& name, ad::Shape shape, std::size_t fan_in, std::size_t fan_out,
                  std::uint64_t seed) {
  Rng rng(derive_seed(seed, {fnv1a64(name)}));
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(ad::shape_numel(shape));
  for (double& x : v) x = rng.uniform(-limit, limit);
  return ad::Tensor::from(std::move(shape), std::move(v), true);
}

LstmParams make_lstm(const std::string& name, const ModelConfig& c, std::uint64_t seed) {
  const std::size_t H = c.lstm_hidden;
  return {xavier(name + ".weight", {c.embed_dim + H, 4 * H}, c.embed_dim + H, 4 * H, seed),
          ad::Tensor::zeros({4 * H}, true)};
}

std::size_t parse_size(const std::map<std::string, std::string>& values, const std::string& key,
                       std::size_t fallback) {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw Error("model config: bad value '" + it->second + "' for " + key);
  }
}

}  // namespace

std::string_view mode_name(MatchMode mode) {
  switch (mode) {
    case MatchMode::two_channel: return "two-channel";
    case MatchMode::semantic_only: return "semantic-only";
    case MatchMode::lexical_only: return "lexical-only";
    case MatchMode::qq_only: return "qq-only";
    case MatchMode::qq_qr: return "qq+qr";
  }
  return "unknown";
}

MatchMode parse_mode(std::string_view name) {
  for (MatchMode m : {MatchMode::two_channel, MatchMode::semantic_only, MatchMode::lexical_only,
                      MatchMode::qq_only, MatchMode::qq_qr}) {
    if (mode_name(m) == name) return m;
  }
  throw Error("unknown mode '" + std::string(name) +
              "' (expected semantic-only, lexical-only, two-channel, qq-only or qq+qr)");
}

ModeTraits mode_traits(MatchMode mode) {
  switch (mode) {
    case MatchMode::semantic_only: return {true, false, false};
    case MatchMode::lexical_only: return {false, true, false};
    case MatchMode::two_channel:
    case MatchMode::qq_only: return {true, true, false};
    case MatchMode::qq_qr: return {true, true, true};
  }
  return {true, true, true};
}

std::vector<std::pair<std::string, std::string>> ModelConfig::to_pairs() const {
  return {{"model.embed_dim", std::to_string(embed_dim)}, {"model.lstm_hidden", std::to_string(lstm_hidden)},
          {"model.kernels", std::to_string(kernels)},     {"model.kernel_size", std::to_string(kernel_size)},
          {"model.pool", std::to_string(pool)},           {"model.mlp_hidden", std::to_string(mlp_hidden)},
          {"model.max_len", std::to_string(max_len)}};
}

ModelConfig ModelConfig::from_map(const std::map<std::string, std::string>& values) {
  ModelConfig c;
  c.embed_dim = parse_size(values, "model.embed_dim", c.embed_dim);
  c.lstm_hidden = parse_size(values, "model.lstm_hidden", c.lstm_hidden);
  c.kernels = parse_size(values, "model.kernels", c.kernels);
  c.kernel_size = parse_size(values, "model.kernel_size", c.kernel_size);
  c.pool = parse_size(values, "model.pool", c.pool);
  c.mlp_hidden = parse_size(values, "model.mlp_hidden", c.mlp_hidden);
  c.max_len = parse_size(values, "model.max_len", c.max_len);
  return c;
}

RelationModel RelationModel::create(const ModelConfig& config, MatchMode mode, EmbeddingMatrix embedding,
                                    std::uint64_t seed) {
  if (embedding.dim() != config.embed_dim) {
    throw ShapeError("model: embedding dim " + std::to_string(embedding.dim()) + " != configured " +
                     std::to_string(config.embed_dim));
  }
  if (config.kernel_size == 0 || config.pool == 0 || config.kernels == 0 || config.lstm_hidden == 0 ||
      config.mlp_hidden == 0 || config.max_len == 0) {
    throw Error("model: all dimensions must be positive");
  }
  RelationModel m;
  m.config = config;
  m.mode = mode;
  m.embedding = std::move(embedding);
  m.embedding.table.set_requires_grad(true);

  const std::size_t n = config.kernels, s = config.kernel_size;
  m.qq.kernels = xavier("qq.conv.kernels", {n, 2, s, s}, 2 * s * s, n * s * s, seed);
  m.qq.kernel_bias = ad::Tensor::zeros({n}, true);
  m.qq.w1 = xavier("qq.mlp.w1", {config.matching_dim(), config.mlp_hidden}, config.matching_dim(),
                   config.mlp_hidden, seed);
  m.qq.b1 = ad::Tensor::zeros({config.mlp_hidden}, true);
  m.qq.w2 = xavier("qq.mlp.w2", {config.mlp_hidden, 1}, config.mlp_hidden, 1, seed);
  m.qq.b2 = ad::Tensor::zeros({1}, true);

  m.qr.question = {make_lstm("qr.question.fwd", config, seed), make_lstm("qr.question.bwd", config, seed)};
  m.qr.relation = {make_lstm("qr.relation.fwd", config, seed), make_lstm("qr.relation.bwd", config, seed)};

  const bool qr = mode_traits(mode).question_relation;
  m.combiner.w1 = ad::Tensor::scalar(0.5, true);
  m.combiner.w2 = ad::Tensor::scalar(qr ? 0.5 : 0.0, qr);
  m.combiner.bias = ad::Tensor::scalar(0.0, true);
  return m;
}

std::vector<ad::NamedParam> RelationModel::named_params() const {
  return {
      {"embedding", embedding.table},
      {"qq.conv.kernels", qq.kernels},
      {"qq.conv.bias", qq.kernel_bias},
      {"qq.mlp.w1", qq.w1},
      {"qq.mlp.b1", qq.b1},
      {"qq.mlp.w2", qq.w2},
      {"qq.mlp.b2", qq.b2},
      {"qr.question.fwd.weight", qr.question.forward.weight},
      {"qr.question.fwd.bias", qr.question.forward.bias},
      {"qr.question.bwd.weight", qr.question.backward.weight},
      {"qr.question.bwd.bias", qr.question.backward.bias},
      {"qr.relation.fwd.weight", qr.relation.forward.weight},
      {"qr.relation.fwd.bias", qr.relation.forward.bias},
      {"qr.relation.bwd.weight", qr.relation.backward.weight},
      {"qr.relation.bwd.bias", qr.relation.backward.bias},
      {"combine.w1", combiner.w1},
      {"combine.w2", combiner.w2},
      {"combine.bias", combiner.bias},
  };
}

std::vector<ad::NamedParam> RelationModel::trainable_params() const {
  const ModeTraits t = mode_traits(mode);
  std::vector<ad::NamedParam> out;
  for (auto& p : named_params()) {
    const bool qr_part = p.name.starts_with("qr.") || p.name == "combine.w2";
    if (qr_part && !t.question_relation) continue;
    // Without the cosine channel or the Q'-R encoders nothing reaches the table.
    if (p.name == "embedding" && !t.cosine_channel && !t.question_relation) continue;
    out.push_back(p);
  }
  return out;
}

RelationModel RelationModel::clone() const {
  RelationModel m = *this;
  m.embedding.table = embedding.table.clone();
  m.qq = {qq.kernels.clone(), qq.kernel_bias.clone(), qq.w1.clone(), qq.b1.clone(), qq.w2.clone(), qq.b2.clone()};
  auto lstm = [](const LstmParams& p) { return LstmParams{p.weight.clone(), p.bias.clone()}; };
  m.qr.question = {lstm(qr.question.forward), lstm(qr.question.backward)};
  m.qr.relation = {lstm(qr.relation.forward), lstm(qr.relation.backward)};
  m.combiner = {combiner.w1.clone(), combiner.w2.clone(), combiner.bias.clone()};
  return m;
}

}  // namespace relmatch
