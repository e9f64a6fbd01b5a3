#pragma once

#include <string>
#include <vector>

#include "oracles.hpp"
#include "relmatch/autodiff/tensor.hpp"
#include "relmatch/dataset.hpp"
#include "relmatch/embedding.hpp"
#include "relmatch/model.hpp"
#include "relmatch/rng.hpp"
#include "relmatch/vocab.hpp"

namespace testing_support {

using namespace relmatch;

inline ModelConfig small_config() {
  ModelConfig c;
  c.embed_dim = 8;
  c.lstm_hidden = 4;
  c.kernels = 3;
  c.kernel_size = 3;
  c.pool = 2;
  c.mlp_hidden = 6;
  c.max_len = 10;
  return c;
}

inline std::vector<double> values(const ad::Tensor& t) { return {t.data().begin(), t.data().end()}; }

inline void randomize(const ad::Tensor& t, Rng& rng, double scale = 0.5) {
  for (double& v : t.data()) v = rng.uniform(-scale, scale);
}

/// Small model with every parameter (biases and combiner included) random.
inline RelationModel random_model(const Vocab& vocab, MatchMode mode, std::uint64_t seed,
                                  ModelConfig config = small_config()) {
  RelationModel m = RelationModel::create(config, mode, init_embeddings(vocab, config.embed_dim, seed), seed);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (const auto& p : m.named_params()) {
    if (p.name == "embedding") continue;
    if (p.name == "combine.w2" && !mode_traits(mode).question_relation) continue;
    randomize(p.tensor, rng, p.name.rfind("combine", 0) == 0 ? 1.0 : 0.5);
  }
  return m;
}

inline oracle::QQWeights qq_weights(const RelationModel& m) {
  oracle::QQWeights w;
  w.kernels = values(m.qq.kernels);
  w.kbias = values(m.qq.kernel_bias);
  w.w1 = values(m.qq.w1);
  w.b1 = values(m.qq.b1);
  w.w2 = values(m.qq.w2);
  w.b2 = values(m.qq.b2);
  w.n = m.config.kernels;
  w.s = m.config.kernel_size;
  w.pool = m.config.pool;
  w.hidden = m.config.mlp_hidden;
  return w;
}

inline oracle::LstmWeights lstm_weights(const LstmParams& p) { return {values(p.weight), values(p.bias)}; }

/// Vocabulary of `n` plain words w0..w{n-1} after the reserved ids.
inline Vocab word_vocab(std::size_t n) {
  Vocab v;
  for (std::size_t i = 0; i < n; ++i) v.add("w" + std::to_string(i));
  return v;
}

inline std::vector<TokenId> random_tokens(Rng& rng, std::size_t len, std::size_t vocab_size) {
  std::vector<TokenId> out(len);
  for (auto& t : out) t = kEntityId + rng.uniform_index(vocab_size - kEntityId);
  return out;
}

/// `per_relation` questions for each of `relations` relations. Every question
/// carries two words unique to its relation plus shared filler, so the task
/// is learnable from lexical overlap.
struct Corpus {
  Vocab vocab;
  RelationTable relations;
  std::vector<QuestionInstance> questions;
};

inline Corpus synthetic_corpus(std::size_t relations, std::size_t per_relation, std::uint64_t seed) {
  Corpus c;
  Rng rng(seed);
  const std::vector<std::string> filler = {"what", "is", "the", "of", "which", "who", "did", "a"};
  std::vector<RelationId> ids;
  for (std::size_t r = 0; r < relations; ++r) {
    ids.push_back(c.relations.intern("/domain" + std::to_string(r) + "/type/rel_" + std::to_string(r), c.vocab));
  }
  for (std::size_t r = 0; r < relations; ++r) {
    for (std::size_t i = 0; i < per_relation; ++i) {
      std::vector<std::string> words;
      words.push_back(filler[rng.uniform_index(filler.size())]);
      words.push_back("key" + std::to_string(r) + "a");
      words.push_back(filler[rng.uniform_index(filler.size())]);
      words.push_back("<e>");
      words.push_back("key" + std::to_string(r) + "b" + std::to_string(rng.uniform_index(3)));
      words.push_back("?");
      QuestionInstance q;
      q.tokens = c.vocab.encode(words, true);
      q.gold = ids[r];
      for (RelationId other : ids)
        if (other != ids[r]) q.negatives.push_back(other);
      c.questions.push_back(std::move(q));
    }
  }
  return c;
}

}  // namespace testing_support
