#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "relmatch/autodiff/ops.hpp"
#include "relmatch/error.hpp"
#include "relmatch/qq_matcher.hpp"
#include "relmatch/qr_matcher.hpp"
#include "relmatch/scoring.hpp"
#include "support.hpp"

using namespace relmatch;
using namespace testing_support;

namespace {

double channel_cos(const InteractionChannels& ch, std::size_t i, std::size_t j) { return ch.cosine_at(i, j); }

/// Central-difference gradient of f() w.r.t. every coordinate of `t`,
/// compared to the analytic gradient accumulated in t.grad().
double max_rel_error(const ad::Tensor& t, const std::function<double()>& f) {
  double worst = 0.0;
  auto data = t.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double x0 = data[i], h = 1e-5;
    data[i] = x0 + h;
    const double up = f();
    data[i] = x0 - h;
    const double dn = f();
    data[i] = x0;
    const double num = (up - dn) / (2 * h), ana = t.grad()[i];
    worst = std::max(worst, std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), 1e-8}));
  }
  return worst;
}

}  // namespace

// ---------------------------------------------------------------- interaction channels

TEST(Channels, IdenticalOneTokenQuestions) {
  const Vocab v = word_vocab(3);
  const auto emb = init_embeddings(v, 5, 1);
  const TokenId a[] = {4};
  const auto ch = build_interaction_channels(a, a, emb, 4);
  EXPECT_NEAR(ch.cosine_at(0, 0), 1.0, 1e-15);
  EXPECT_EQ(ch.indicator_at(0, 0), 1.0);
}

TEST(Channels, OrthogonalDifferentTokens) {
  const Vocab v = word_vocab(2);
  auto emb = init_embeddings(v, 2, 1);
  auto t = emb.table.data();
  t[3 * 2 + 0] = 1;
  t[3 * 2 + 1] = 0;
  t[4 * 2 + 0] = 0;
  t[4 * 2 + 1] = 2;
  const TokenId a[] = {3}, b[] = {4};
  const auto ch = build_interaction_channels(a, b, emb, 3);
  EXPECT_EQ(ch.cosine_at(0, 0), 0.0);
  EXPECT_EQ(ch.indicator_at(0, 0), 0.0);
}

TEST(Channels, MatchDoubleLoopOracle) {
  const Vocab v = word_vocab(6);
  const auto emb = init_embeddings(v, 7, 2);
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_tokens(rng, 3, v.size()), b = random_tokens(rng, 4, v.size());
    const auto ch = build_interaction_channels(a, b, emb, 10);
    const auto want = oracle::interaction(a, b, values(emb.table), 7, 10);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_NEAR(ch.cosine_at(i, j), want.cosine[i * 4 + j], 1e-15);
        EXPECT_EQ(ch.indicator_at(i, j), want.indicator[i * 4 + j]);
      }
  }
}

TEST(Channels, EntityMatchesEntity) {
  const Vocab v = word_vocab(2);
  const auto emb = init_embeddings(v, 4, 1);
  const TokenId a[] = {kEntityId, 3}, b[] = {4, kEntityId};
  EXPECT_EQ(build_interaction_channels(a, b, emb, 5).indicator_at(0, 1), 1.0);
}

TEST(Channels, SymmetryRangeBinaryAndZeroBeyondLength) {
  const Vocab v = word_vocab(5);
  const auto emb = init_embeddings(v, 6, 4);
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = random_tokens(rng, 1 + rng.uniform_index(8), v.size());
    const auto b = random_tokens(rng, 1 + rng.uniform_index(8), v.size());
    const auto ab = build_interaction_channels(a, b, emb, 8), ba = build_interaction_channels(b, a, emb, 8);
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j) {
        EXPECT_EQ(ab.cosine_at(i, j), ba.cosine_at(j, i));
        EXPECT_EQ(ab.indicator_at(i, j), ba.indicator_at(j, i));
        EXPECT_GE(ab.cosine_at(i, j), -1.0);
        EXPECT_LE(ab.cosine_at(i, j), 1.0);
        const double ind = ab.indicator_at(i, j);
        EXPECT_TRUE(ind == 0.0 || ind == 1.0);
        if (i >= a.size() || j >= b.size()) {
          EXPECT_EQ(ab.cosine_at(i, j), 0.0);
          EXPECT_EQ(ind, 0.0);
        }
      }
  }
}

TEST(Channels, PermutingTokensPermutesRows) {
  const Vocab v = word_vocab(6);
  const auto emb = init_embeddings(v, 5, 8);
  Rng rng(9);
  const auto a = random_tokens(rng, 5, v.size()), b = random_tokens(rng, 4, v.size());
  std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
  std::vector<TokenId> pa(5);
  for (std::size_t i = 0; i < 5; ++i) pa[i] = a[perm[i]];
  const auto ch = build_interaction_channels(a, b, emb, 6), pch = build_interaction_channels(pa, b, emb, 6);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_EQ(pch.cosine_at(i, j), ch.cosine_at(perm[i], j));
      EXPECT_EQ(pch.indicator_at(i, j), ch.indicator_at(perm[i], j));
    }
}

TEST(Channels, CosineChannelScaleInvariant) {
  const Vocab v = word_vocab(6);
  const auto emb = init_embeddings(v, 5, 8);
  EmbeddingMatrix scaled{emb.table.clone()};
  for (double& x : scaled.table.data()) x *= 3.7;
  Rng rng(2);
  const auto a = random_tokens(rng, 4, v.size()), b = random_tokens(rng, 6, v.size());
  const auto c1 = build_interaction_channels(a, b, emb, 8), c2 = build_interaction_channels(a, b, scaled, 8);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(channel_cos(c1, i, j), channel_cos(c2, i, j), 1e-15);
}

TEST(Channels, ZeroNormRowGivesZeroNotNaN) {
  const Vocab v = word_vocab(2);
  const auto emb = init_embeddings(v, 4, 1);
  const TokenId a[] = {kPadId}, b[] = {3};
  EXPECT_EQ(build_interaction_channels(a, b, emb, 4).cosine_at(0, 0), 0.0);
  EXPECT_THROW(build_interaction_channels(std::span<const TokenId>{}, b, emb, 4), Error);
}

// ---------------------------------------------------------------- forward_qq

TEST(ForwardQQ, ZeroChannelsZeroMlpGivesHalf) {
  const Vocab v = word_vocab(3);
  RelationModel m = random_model(v, MatchMode::qq_qr, 1);
  for (const ad::Tensor* t : {&m.qq.kernel_bias, &m.qq.w1, &m.qq.b1, &m.qq.w2, &m.qq.b2})
    for (double& x : t->data()) x = 0.0;
  InteractionChannels ch;
  ch.max_len = 4;
  ch.len_a = ch.len_b = 4;
  ch.cosine.assign(16, 0.0);
  ch.indicator.assign(16, 0.0);
  EXPECT_EQ(forward_qq(ch, m.qq, m.config), 0.5);
}

TEST(ForwardQQ, ZeroChannelsGiveMlpOfBias) {
  const Vocab v = word_vocab(3);
  RelationModel m = random_model(v, MatchMode::qq_qr, 2);
  for (double& x : m.qq.kernel_bias.data()) x = 0.0;
  InteractionChannels ch;
  ch.max_len = 5;
  ch.len_a = ch.len_b = 5;
  ch.cosine.assign(25, 0.0);
  ch.indicator.assign(25, 0.0);
  double o = m.qq.b2.data()[0];
  for (std::size_t u = 0; u < m.config.mlp_hidden; ++u) o += std::max(0.0, m.qq.b1.data()[u]) * m.qq.w2.data()[u];
  EXPECT_NEAR(forward_qq(ch, m.qq, m.config), oracle::sigmoid(o), 1e-15);
}

TEST(ForwardQQ, SingleIdentityKernelIsMonotoneInMaxInteraction) {
  ModelConfig c = small_config();
  c.kernels = 1;
  c.kernel_size = 1;
  c.pool = 1;
  c.mlp_hidden = 1;
  const Vocab v = word_vocab(3);
  RelationModel m = RelationModel::create(c, MatchMode::qq_qr, init_embeddings(v, c.embed_dim, 1), 1);
  m.qq.kernels = ad::Tensor::from({1, 2, 1, 1}, {1.0, 0.0});
  m.qq.w1.data()[0] = 1.0;
  m.qq.w2.data()[0] = 1.0;
  double prev = -1.0;
  for (double peak : {0.1, 0.3, 0.5, 0.9}) {
    InteractionChannels ch;
    ch.max_len = 3;
    ch.len_a = ch.len_b = 3;
    ch.cosine.assign(9, 0.05);
    ch.cosine[4] = peak;
    ch.indicator.assign(9, 0.0);
    const double s1 = forward_qq(ch, m.qq, m.config);
    EXPECT_NEAR(s1, oracle::sigmoid(peak), 1e-15);
    EXPECT_GT(s1, prev);
    prev = s1;
  }
}

TEST(ForwardQQ, MatchesComposedOracleAndStaysInUnitInterval) {
  const Vocab v = word_vocab(12);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RelationModel m = random_model(v, MatchMode::qq_qr, seed);
    Rng rng(seed + 100);
    const auto a = random_tokens(rng, 1 + rng.uniform_index(12), v.size());
    const auto b = random_tokens(rng, 1 + rng.uniform_index(12), v.size());
    const auto ch = build_interaction_channels(a, b, m.embedding, m.config.max_len);
    const double got = forward_qq(ch, m.qq, m.config);
    const auto och = oracle::interaction(a, b, values(m.embedding.table), m.config.embed_dim, m.config.max_len);
    EXPECT_NEAR(got, oracle::qq_score(och, qq_weights(m)), 1e-12);
    EXPECT_GT(got, 0.0);
    EXPECT_LT(got, 1.0);
    // differentiable token path agrees with the constant-channel path
    ad::Tape tape(false);
    EXPECT_NEAR(score_qq(tape, a, b, m.embedding, m.qq, m.config).item(), got, 1e-14);
  }
}

TEST(ForwardQQ, ChannelMasksMatchOracle) {
  const Vocab v = word_vocab(8);
  RelationModel m = random_model(v, MatchMode::qq_qr, 4);
  Rng rng(4);
  const auto a = random_tokens(rng, 6, v.size()), b = random_tokens(rng, 5, v.size());
  const auto ch = build_interaction_channels(a, b, m.embedding, m.config.max_len);
  const auto och = oracle::interaction(a, b, values(m.embedding.table), m.config.embed_dim, m.config.max_len);
  EXPECT_NEAR(forward_qq(ch, m.qq, m.config, {true, false}), oracle::qq_score(och, qq_weights(m), true, false), 1e-12);
  EXPECT_NEAR(forward_qq(ch, m.qq, m.config, {false, true}), oracle::qq_score(och, qq_weights(m), false, true), 1e-12);
  ad::Tape tape(false);
  EXPECT_NEAR(score_qq(tape, a, b, m.embedding, m.qq, m.config, {false, true}).item(),
              oracle::qq_score(och, qq_weights(m), false, true), 1e-12);
}

TEST(ForwardQQ, ShortQuestionsArePadded) {
  const Vocab v = word_vocab(4);
  RelationModel m = random_model(v, MatchMode::qq_qr, 5);
  const TokenId a[] = {3}, b[] = {4, 5};
  ad::Tape tape(false);
  const double s = score_qq(tape, a, b, m.embedding, m.qq, m.config).item();
  const auto och = oracle::interaction({3}, {4, 5}, values(m.embedding.table), m.config.embed_dim, m.config.max_len);
  EXPECT_NEAR(s, oracle::qq_score(och, qq_weights(m)), 1e-12);
}

TEST(ForwardQQ, LongQuestionsAreTruncated) {
  const Vocab v = word_vocab(4);
  RelationModel m = random_model(v, MatchMode::qq_qr, 6);
  Rng rng(6);
  const auto a = random_tokens(rng, 15, v.size()), b = random_tokens(rng, 12, v.size());
  const std::vector<TokenId> ta(a.begin(), a.begin() + 10), tb(b.begin(), b.begin() + 10);
  ad::Tape t1(false), t2(false);
  EXPECT_EQ(score_qq(t1, a, b, m.embedding, m.qq, m.config).item(),
            score_qq(t2, ta, tb, m.embedding, m.qq, m.config).item());
}

TEST(ForwardQQ, GradientsPassFiniteDifference) {
  const Vocab v = word_vocab(6);
  RelationModel m = random_model(v, MatchMode::qq_qr, 7);
  Rng rng(7);
  const auto a = random_tokens(rng, 5, v.size()), b = random_tokens(rng, 4, v.size());
  auto f = [&] {
    ad::Tape t(false);
    return score_qq(t, a, b, m.embedding, m.qq, m.config).item();
  };
  ad::Tape tape;
  tape.backward(ad::sum(tape, score_qq(tape, a, b, m.embedding, m.qq, m.config)));
  for (const auto* t : {&m.qq.kernels, &m.qq.kernel_bias, &m.qq.w1, &m.qq.b1, &m.qq.w2, &m.qq.b2, &m.embedding.table})
    EXPECT_LT(max_rel_error(*t, f), 1e-4);
  for (std::size_t k = 0; k < m.config.embed_dim; ++k) EXPECT_EQ(m.embedding.table.grad()[k], 0.0);
}

// ---------------------------------------------------------------- encode_sequence / forward_qr

TEST(Encode, ZeroParametersGiveZeroVector) {
  const Vocab v = word_vocab(4);
  RelationModel m = random_model(v, MatchMode::qq_qr, 1);
  for (const ad::Tensor* t : {&m.qr.question.forward.weight, &m.qr.question.forward.bias,
                              &m.qr.question.backward.weight, &m.qr.question.backward.bias})
    for (double& x : t->data()) x = 0.0;
  const TokenId toks[] = {3, 4, 5};
  ad::Tape tape(false);
  const auto h = encode_sequence(tape, toks, m.embedding, m.qr.question);
  EXPECT_EQ(h.shape(), (ad::Shape{1, 2 * m.config.lstm_hidden}));
  for (double x : h.data()) EXPECT_EQ(x, 0.0);
}

TEST(Encode, SingleTokenEqualsItsHiddenState) {
  const Vocab v = word_vocab(4);
  RelationModel m = random_model(v, MatchMode::qq_qr, 2);
  const TokenId tok[] = {5};
  ad::Tape tape(false);
  const auto h = encode_sequence(tape, tok, m.embedding, m.qr.relation);
  const std::size_t H = m.config.lstm_hidden, d = m.config.embed_dim;
  std::vector<double> hf(H, 0), cf(H, 0), hb(H, 0), cb(H, 0);
  const auto table = values(m.embedding.table);
  oracle::lstm_step(&table[5 * d], d, hf, cf, lstm_weights(m.qr.relation.forward));
  oracle::lstm_step(&table[5 * d], d, hb, cb, lstm_weights(m.qr.relation.backward));
  for (std::size_t u = 0; u < H; ++u) {
    EXPECT_NEAR(h.data()[u], hf[u], 1e-15);
    EXPECT_NEAR(h.data()[H + u], hb[u], 1e-15);
  }
}

TEST(Encode, MatchesHandUnrolledOracle) {
  const Vocab v = word_vocab(10);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RelationModel m = random_model(v, MatchMode::qq_qr, seed);
    Rng rng(seed);
    const auto toks = random_tokens(rng, 1 + rng.uniform_index(7), v.size());
    ad::Tape tape(false);
    const auto got = values(encode_sequence(tape, toks, m.embedding, m.qr.question));
    const auto want = oracle::bilstm_encode(toks, values(m.embedding.table), m.config.embed_dim,
                                            lstm_weights(m.qr.question.forward),
                                            lstm_weights(m.qr.question.backward), m.config.lstm_hidden);
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(Encode, EmptySequenceIsError) {
  const Vocab v = word_vocab(2);
  RelationModel m = random_model(v, MatchMode::qq_qr, 2);
  ad::Tape tape(false);
  EXPECT_THROW(encode_sequence(tape, std::span<const TokenId>{}, m.embedding, m.qr.question), Error);
}

TEST(Encode, OrderSensitiveRegressionFixture) {
  // Fixed counterexample: reversing [3 4 5 6] changes the encoding.
  const Vocab v = word_vocab(6);
  RelationModel m = random_model(v, MatchMode::qq_qr, 2024);
  const TokenId fwd[] = {3, 4, 5, 6}, rev[] = {6, 5, 4, 3};
  ad::Tape tape(false);
  const auto a = values(encode_sequence(tape, fwd, m.embedding, m.qr.question));
  const auto b = values(encode_sequence(tape, rev, m.embedding, m.qr.question));
  double diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
  EXPECT_GT(diff, 1e-3);
}

TEST(ForwardQR, SelfCosineOneAndRange) {
  const Vocab v = word_vocab(6);
  RelationModel m = random_model(v, MatchMode::qq_qr, 3);
  QRParams tied{m.qr.question, m.qr.question};
  const TokenId toks[] = {3, 4, 7};
  EXPECT_NEAR(forward_qr(toks, toks, m.embedding, tied), 1.0, 1e-14);
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_tokens(rng, 1 + rng.uniform_index(6), v.size());
    const auto b = random_tokens(rng, 1 + rng.uniform_index(4), v.size());
    const double s2 = forward_qr(a, b, m.embedding, m.qr);
    EXPECT_GE(s2, -1.0);
    EXPECT_LE(s2, 1.0);
    ad::Tape tape(false);
    const auto hq = values(encode_sequence(tape, a, m.embedding, m.qr.question));
    const auto hr = values(encode_sequence(tape, b, m.embedding, m.qr.relation));
    EXPECT_NEAR(s2, oracle::cosine(hq.data(), hr.data(), hq.size()), 1e-14);
  }
}

TEST(ForwardQR, OrthogonalEncodingsGiveZero) {
  // Zero weights, bias steering the question's o-gate and cell input on
  // unit 0 only and the relation's on unit 1 only.
  const Vocab v = word_vocab(3);
  RelationModel m = random_model(v, MatchMode::qq_qr, 4);
  const std::size_t H = m.config.lstm_hidden;
  auto steer = [&](LstmParams& p, std::size_t unit) {
    for (double& x : p.weight.data()) x = 0.0;
    for (double& x : p.bias.data()) x = -30.0;
    p.bias.data()[unit] = 30.0;              // i
    p.bias.data()[2 * H + unit] = 30.0;      // o
    p.bias.data()[3 * H + unit] = 1.0;       // g
  };
  steer(m.qr.question.forward, 0);
  steer(m.qr.question.backward, 0);
  steer(m.qr.relation.forward, 1);
  steer(m.qr.relation.backward, 1);
  const TokenId a[] = {3, 4}, b[] = {5};
  EXPECT_NEAR(forward_qr(a, b, m.embedding, m.qr), 0.0, 1e-12);
}

TEST(ForwardQR, GradientsThroughBothEncoders) {
  const Vocab v = word_vocab(5);
  RelationModel m = random_model(v, MatchMode::qq_qr, 9);
  const TokenId a[] = {3, 4, 6}, b[] = {5, 7};
  auto f = [&] { return forward_qr(a, b, m.embedding, m.qr); };
  ad::Tape tape;
  tape.backward(ad::sum(tape, forward_qr(tape, a, b, m.embedding, m.qr)));
  for (const auto* p : {&m.qr.question.forward, &m.qr.question.backward, &m.qr.relation.forward,
                        &m.qr.relation.backward}) {
    EXPECT_LT(max_rel_error(p->weight, f), 1e-4);
    EXPECT_LT(max_rel_error(p->bias, f), 1e-4);
  }
  EXPECT_LT(max_rel_error(m.embedding.table, f), 1e-4);
}

// ---------------------------------------------------------------- scoring

TEST(Combine, Examples) {
  CombinerParams c{ad::Tensor::scalar(1.0), ad::Tensor::scalar(0.0), ad::Tensor::scalar(0.0)};
  EXPECT_EQ(combine_scores(0.37, -0.9, c), 0.37);
  c.w1.data()[0] = 0.5;
  c.w2.data()[0] = 0.5;
  EXPECT_EQ(combine_scores(0.2, 0.6, c), 0.5 * 0.2 + 0.5 * 0.6);
  ad::Tape tape(false);
  EXPECT_EQ(combine_scores(tape, ad::Tensor::scalar(0.2), ad::Tensor::scalar(0.6), c).item(),
            combine_scores(0.2, 0.6, c));
}

TEST(Combine, DerivativeWrtW1IsS1) {
  CombinerParams c{ad::Tensor::scalar(0.3, true), ad::Tensor::scalar(-0.7, true), ad::Tensor::scalar(0.1, true)};
  const double s1 = 0.81, s2 = -0.4;
  ad::Tape tape;
  tape.backward(combine_scores(tape, ad::Tensor::scalar(s1), ad::Tensor::scalar(s2), c));
  const double h = 1e-6;
  c.w1.data()[0] += h;
  const double up = combine_scores(s1, s2, c);
  c.w1.data()[0] -= 2 * h;
  const double dn = combine_scores(s1, s2, c);
  EXPECT_NEAR((up - dn) / (2 * h), s1, 1e-9);
  EXPECT_NEAR(c.w1.grad()[0], s1, 1e-15);
  EXPECT_NEAR(c.w2.grad()[0], s2, 1e-15);
  EXPECT_NEAR(c.bias.grad()[0], 1.0, 1e-15);
}

TEST(RankingLoss, Examples) {
  const std::vector<double> far = {-1.0, -2.0};
  EXPECT_EQ(ranking_loss(1.0, far, 0.5), 0.0);
  const std::vector<double> equal = {0.3, 0.3};
  EXPECT_DOUBLE_EQ(ranking_loss(0.3, equal, 0.5), 0.5);
  EXPECT_THROW(ranking_loss(0.3, std::span<const double>{}, 0.5), Error);
}

TEST(RankingLoss, MatchesFormulaAndTensorPath) {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const double fp = rng.uniform(-1, 1);
    std::vector<double> fn(1 + rng.uniform_index(6));
    for (double& x : fn) x = rng.uniform(-1, 1);
    const double want = oracle::hinge(fp, fn, 0.5);
    EXPECT_NEAR(ranking_loss(fp, fn, 0.5), want, 1e-15);
    std::vector<ad::Tensor> tn;
    for (double x : fn) tn.push_back(ad::Tensor::scalar(x));
    ad::Tape tape(false);
    EXPECT_EQ(ranking_loss(tape, ad::Tensor::scalar(fp), tn, 0.5).item(), ranking_loss(fp, fn, 0.5));
    EXPECT_GE(want, 0.0);
  }
}
