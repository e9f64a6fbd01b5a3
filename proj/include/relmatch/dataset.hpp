#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "relmatch/vocab.hpp"

namespace relmatch {

using RelationId = std::size_t;

struct RelationLabel {
  RelationId id = 0;
  std::string path;
  std::vector<TokenId> words;
};

/// Relations interned by path, ids dense in first-seen order.
class RelationTable {
 public:
  RelationId intern(std::string_view path, Vocab& vocab);
  std::optional<RelationId> find(std::string_view path) const;
  const RelationLabel& at(RelationId id) const { return labels_.at(id); }
  std::size_t size() const { return labels_.size(); }
  const std::vector<RelationLabel>& labels() const { return labels_; }

 private:
  std::vector<RelationLabel> labels_;
  std::unordered_map<std::string, RelationId> index_;
};

struct QuestionInstance {
  std::vector<TokenId> tokens;
  RelationId gold = 0;
  std::vector<RelationId> negatives;
};

/// Lowercases, splits on whitespace and splits leading/trailing punctuation
/// off as separate tokens. `<e>` and apostrophes inside words are kept.
std::vector<std::string> tokenize_question(std::string_view text);

/// Splits on '/' and '_', drops empties, lowercases. Throws on paths with no
/// alphanumeric content.
std::vector<std::string> tokenize_relation(std::string_view path);

/// Replaces the first occurrence of the entity's token span with `<e>`.
/// Text that already carries `<e>` and lacks the entity is returned as is.
/// Throws if the entity is absent otherwise.
std::vector<std::string> mask_entity(std::string_view question, std::string_view entity);

/// One benchmark line: `gold \t negatives (space separated) \t question`.
QuestionInstance parse_benchmark_line(std::string_view line, std::size_t line_no, const std::string& source,
                                      Vocab& vocab, RelationTable& relations);

std::vector<QuestionInstance> parse_benchmark(std::istream& in, const std::string& source, Vocab& vocab,
                                              RelationTable& relations);
std::vector<QuestionInstance> parse_benchmark_file(const std::filesystem::path& path, Vocab& vocab,
                                                   RelationTable& relations);

void write_benchmark(std::ostream& out, std::span<const QuestionInstance> instances, const Vocab& vocab,
                     const RelationTable& relations);

/// Converts one line of the published relation-detection layout
/// (`gold_idx \t neg_idx ... \t question with #head_entity#`, 1-based indices
/// into `relation_list`, `noNegativeAnswer` for none) to the benchmark layout.
/// Lines already in benchmark layout pass through unchanged.
std::string convert_published_line(std::string_view line, std::size_t line_no, const std::string& source,
                                   const std::vector<std::string>& relation_list);

/// Normalizes `film.film.genre` or `film/film/genre` to `/film/film/genre`.
std::string normalize_relation_path(std::string_view raw);

struct QuestionPool {
  std::map<RelationId, std::vector<std::size_t>> members;

  const std::vector<std::size_t>* find(RelationId r) const;
  std::size_t total() const;
};

QuestionPool build_question_pools(std::span<const QuestionInstance> train);

/// A pool question: a train instance, or the synthetic relation-word question
/// of a relation that has no pool.
struct PoolQuestion {
  std::optional<std::size_t> index;
  RelationId relation = 0;

  bool synthetic() const { return !index.has_value(); }
  friend bool operator==(const PoolQuestion&, const PoolQuestion&) = default;
};

std::span<const TokenId> question_tokens(const PoolQuestion& q, std::span<const QuestionInstance> train,
                                         const RelationTable& relations);

struct TrainingTriple {
  std::size_t anchor = 0;
  PoolQuestion positive;
  std::vector<PoolQuestion> negatives;
};

struct SamplerConfig {
  std::size_t k_positive = 5;
  std::size_t k_negative = 20;
  std::uint64_t seed = 0;
  bool relation_word_fallback = true;
};

/// One triple per sampled positive; all triples of an anchor share the same
/// negatives. `stream` selects an independent RNG stream (the epoch).
std::vector<TrainingTriple> sample_training_triples(std::size_t anchor, std::span<const QuestionInstance> train,
                                                    const QuestionPool& pools, const RelationTable& relations,
                                                    const SamplerConfig& cfg, std::uint64_t stream = 0);

}  // namespace relmatch
