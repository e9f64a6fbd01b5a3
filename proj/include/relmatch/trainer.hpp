#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "relmatch/autodiff/adagrad.hpp"
#include "relmatch/dataset.hpp"
#include "relmatch/model.hpp"
#include "relmatch/scoring.hpp"

namespace relmatch {

struct TrainConfig {
  std::size_t batch_size = 64;
  double learning_rate = 0.05;
  double margin = 0.5;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;
  std::size_t k_positive = 5;
  std::size_t k_negative = 20;
  std::size_t patience = 5;

  // Validation.
  std::size_t valid_k = 5;
  std::size_t valid_pool_cap = 50;
  /// The validation set is the training set: score each question with itself
  /// removed from its pool.
  bool valid_is_train = false;
  /// Stop once validation accuracy reaches this value.
  double stop_at_accuracy = 2.0;

  void validate() const;
  std::vector<std::pair<std::string, std::string>> to_pairs() const;
};

struct TrainingData {
  std::span<const QuestionInstance> train;
  std::span<const QuestionInstance> valid;
  const QuestionPool& pools;
  const RelationTable& relations;
};

using AnchorTriples = std::vector<TrainingTriple>;

/// Mean ranking loss over an anchor's triples, or nullopt when the anchor has
/// no usable negatives.
std::optional<ad::Tensor> anchor_loss(ad::Tape& tape, const RelationModel& model, std::span<const TrainingTriple> triples,
                                      const TrainingData& data, double margin);

/// Mean anchor loss of a batch without recording gradients.
double batch_loss(const RelationModel& model, std::span<const AnchorTriples> batch, const TrainingData& data,
                  double margin);

/// Backpropagates the batch's mean anchor loss and applies one optimizer
/// step. Returns the pre-step loss.
double train_step(RelationModel& model, ad::Adagrad& optimizer, std::span<const AnchorTriples> batch,
                  const TrainingData& data, double margin);

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double valid_accuracy = 0.0;
  bool improved = false;
};

struct TrainResult {
  RelationModel best;
  std::vector<EpochStats> history;
  std::uint64_t steps = 0;
  std::size_t best_epoch = 0;
  double best_valid_accuracy = -1.0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Mini-batch Adagrad training with per-epoch resampling, best-on-valid model
/// selection and early stopping.
TrainResult train(RelationModel model, const TrainingData& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

}  // namespace relmatch
