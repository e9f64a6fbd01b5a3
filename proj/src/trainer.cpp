#include "relmatch/trainer.hpp"

#include <cmath>
#include <numeric>
#include <set>

#include <spdlog/spdlog.h>

#include "relmatch/autodiff/ops.hpp"
#include "relmatch/error.hpp"
#include "relmatch/inference.hpp"
#include "relmatch/rng.hpp"

namespace relmatch {
namespace {

bool usable(const AnchorTriples& triples) { return !triples.empty() && !triples.front().negatives.empty(); }

std::string anchor_list(std::span<const AnchorTriples> batch) {
  std::string out;
  for (const auto& t : batch) {
    if (t.empty()) continue;
    if (!out.empty()) out += ',';
    out += std::to_string(t.front().anchor);
  }
  return out;
}

double validation_accuracy(const RelationModel& model, const TrainingData& data, const TrainConfig& cfg) {
  Predictor predictor(model, data.train, data.pools, data.relations);
  InferenceConfig icfg;
  icfg.k = cfg.valid_k;
  icfg.pool_cap = cfg.valid_pool_cap;
  icfg.seed = cfg.seed;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.valid.size(); ++i) {
    const QuestionInstance& q = data.valid[i];
    if (cfg.valid_is_train) icfg.exclude_question = i;
    const auto candidates = candidate_relations(q);
    if (predictor.predict_relation(q.tokens, candidates, icfg) == q.gold) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.valid.size());
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw Error("train config: batch_size must be >= 1");
  if (!(margin > 0.0)) throw Error("train config: margin must be > 0");
  if (!(learning_rate >= 0.0)) throw Error("train config: learning rate must be >= 0");
  if (k_positive == 0 || k_negative == 0) throw Error("train config: k_positive and k_negative must be >= 1");
  if (valid_k == 0) throw Error("train config: valid_k must be >= 1");
}

std::vector<std::pair<std::string, std::string>> TrainConfig::to_pairs() const {
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  return {{"train.batch_size", std::to_string(batch_size)},
          {"train.learning_rate", num(learning_rate)},
          {"train.margin", num(margin)},
          {"train.epochs", std::to_string(epochs)},
          {"train.seed", std::to_string(seed)},
          {"train.k_positive", std::to_string(k_positive)},
          {"train.k_negative", std::to_string(k_negative)},
          {"train.patience", std::to_string(patience)}};
}

std::optional<ad::Tensor> anchor_loss(ad::Tape& tape, const RelationModel& model, std::span<const TrainingTriple> triples,
                                      const TrainingData& data, double margin) {
  if (triples.empty() || triples.front().negatives.empty()) return std::nullopt;
  const QuestionInstance& anchor = data.train[triples.front().anchor];
  QueryScorer scorer(tape, model, anchor.tokens);
  auto score = [&](const PoolQuestion& q) {
    ad::Tensor s1 = scorer.s1(question_tokens(q, data.train, data.relations));
    ad::Tensor s2 = scorer.s2(q.relation, data.relations.at(q.relation).words);
    return scorer.f(s1, s2);
  };
  std::vector<ad::Tensor> negatives;
  negatives.reserve(triples.front().negatives.size());
  for (const auto& q : triples.front().negatives) negatives.push_back(score(q));

  std::vector<ad::Tensor> losses;
  losses.reserve(triples.size());
  for (const auto& t : triples) losses.push_back(ranking_loss(tape, score(t.positive), negatives, margin));
  const std::vector<ad::Tensor> weights(losses.size(), ad::Tensor::scalar(1.0 / static_cast<double>(losses.size())));
  return ad::affine_combine(tape, weights, losses, ad::Tensor::scalar(0.0));
}

double batch_loss(const RelationModel& model, std::span<const AnchorTriples> batch, const TrainingData& data,
                  double margin) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& triples : batch) {
    ad::Tape tape(false);
    if (auto loss = anchor_loss(tape, model, triples, data, margin)) {
      total += loss->item();
      ++n;
    }
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

double train_step(RelationModel& model, ad::Adagrad& optimizer, std::span<const AnchorTriples> batch,
                  const TrainingData& data, double margin) {
  for (const auto& p : optimizer.params()) {
    ad::Tensor t = p.tensor;
    t.zero_grad();
  }
  const std::size_t n = static_cast<std::size_t>(std::count_if(batch.begin(), batch.end(), usable));
  double total = 0.0;
  try {
    if (n > 0) {
      const ad::Tensor scale[] = {ad::Tensor::scalar(1.0 / static_cast<double>(n))};
      for (const auto& triples : batch) {
        ad::Tape tape;
        auto loss = anchor_loss(tape, model, triples, data, margin);
        if (!loss) continue;
        const ad::Tensor terms[] = {*loss};
        ad::Tensor scaled = ad::affine_combine(tape, scale, terms, ad::Tensor::scalar(0.0));
        total += scaled.item();
        tape.backward(scaled);
      }
    }
    if (!std::isfinite(total)) throw NonFiniteError("batch loss is " + std::to_string(total));
  } catch (const NonFiniteError& e) {
    throw NonFiniteError(std::string(e.what()) + " (batch anchors: " + anchor_list(batch) + ")");
  }
  optimizer.step();
  return total;
}

TrainResult train(RelationModel model, const TrainingData& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.train.empty()) throw Error("train: empty training set");

  std::set<std::string> trainable;
  for (const auto& p : model.trainable_params()) trainable.insert(p.name);
  for (auto& p : model.named_params()) p.tensor.set_requires_grad(trainable.count(p.name) > 0);
  ad::Adagrad optimizer(model.trainable_params(), cfg.learning_rate);

  SamplerConfig sampler{cfg.k_positive, cfg.k_negative, cfg.seed, true};
  TrainResult result;
  result.best = model.clone();
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t stale = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, {epoch, 0x5ca1ab1eULL}));
    rng.shuffle(order);
    double weighted = 0.0;
    std::size_t counted = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<AnchorTriples> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(sample_training_triples(order[i], data.train, data.pools, data.relations, sampler, epoch));
      }
      const std::size_t n = static_cast<std::size_t>(std::count_if(batch.begin(), batch.end(), usable));
      const double loss = train_step(model, optimizer, batch, data, cfg.margin);
      weighted += loss * static_cast<double>(n);
      counted += n;
      ++result.steps;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = counted ? weighted / static_cast<double>(counted) : 0.0;
    if (data.valid.empty()) {
      stats.improved = true;
    } else {
      stats.valid_accuracy = validation_accuracy(model, data, cfg);
      stats.improved = stats.valid_accuracy > result.best_valid_accuracy;
    }
    if (stats.improved) {
      result.best = model.clone();
      result.best_epoch = epoch;
      result.best_valid_accuracy = stats.valid_accuracy;
      stale = 0;
    } else {
      ++stale;
    }
    result.history.push_back(stats);
    spdlog::info("epoch {}: loss {:.6f} valid {:.4f}{}", epoch, stats.mean_loss, stats.valid_accuracy,
                 stats.improved ? " *" : "");
    if (on_epoch) on_epoch(stats);
    if (!data.valid.empty() && stats.valid_accuracy >= cfg.stop_at_accuracy) break;
    if (stale >= cfg.patience) break;
  }
  return result;
}

}  // namespace relmatch
