#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "relmatch/dataset.hpp"
#include "relmatch/embedding.hpp"
#include "relmatch/inference.hpp"
#include "relmatch/model.hpp"
#include "relmatch/trainer.hpp"
#include "relmatch/vocab.hpp"

namespace relmatch {

struct SampleRecord {
  std::size_t index = 0;
  std::string question;
  RelationId gold = 0;
  RelationId predicted = 0;
  std::vector<ScoredCandidate> evidence;

  bool correct() const { return gold == predicted; }
};

struct EvalResult {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;
  std::vector<SampleRecord> records;
  std::string fingerprint;
};

/// Predicts every sample against its own candidate set. With
/// `leave_one_out`, sample i is the train question i and is excluded from
/// its own pool.
EvalResult evaluate(std::span<const QuestionInstance> test, const Predictor& predictor, const Vocab& vocab,
                    const InferenceConfig& cfg, bool leave_one_out = false);

/// Percent with two decimals, e.g. "93.41".
std::string format_accuracy(double accuracy);

/// 16 hex digits over the config text and the checkpoint digest.
std::string config_fingerprint(const std::vector<std::pair<std::string, std::string>>& config,
                               std::uint64_t checkpoint_digest);

inline constexpr char kErrorReportHeader[] = "question\tgold_relation\tpredicted_relation\tevidence";

/// TSV of misclassified samples with their top-k evidence questions.
void write_error_report(const EvalResult& result, const RelationTable& relations, const Vocab& vocab,
                        const Predictor& predictor, const std::filesystem::path& out);

struct AmbiguousQuestion {
  std::string question;
  std::vector<RelationId> relations;
  std::size_t train_count = 0;
};

/// Test questions whose exact masked text carries more than one gold
/// relation in the training data.
std::vector<AmbiguousQuestion> find_ambiguous_questions(std::span<const QuestionInstance> train,
                                                        std::span<const QuestionInstance> test,
                                                        const Vocab& vocab);

inline constexpr char kAmbiguityReportHeader[] = "question\ttrain_relations\ttrain_count";

void write_ambiguity_report(std::span<const AmbiguousQuestion> rows, const RelationTable& relations,
                            const std::filesystem::path& out);

struct AblationData {
  std::vector<QuestionInstance> train;
  std::vector<QuestionInstance> valid;
  std::vector<QuestionInstance> test;
  Vocab vocab;
  RelationTable relations;
  EmbeddingMatrix embedding;
};

struct AblationRun {
  TrainResult training;
  EvalResult eval;
};

/// Trains a fresh model under `mode` and evaluates it on the test split.
AblationRun run_ablation(MatchMode mode, const AblationData& data, const ModelConfig& model_config,
                         const TrainConfig& train_config, const InferenceConfig& infer_config,
                         std::uint64_t init_seed);

}  // namespace relmatch
