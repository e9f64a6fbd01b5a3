#include "relmatch/eval.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>

#include "relmatch/error.hpp"
#include "relmatch/rng.hpp"

namespace relmatch {
namespace {

std::string tsv_field(std::string s) {
  for (char& c : s) {
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

std::ofstream open_report(const std::filesystem::path& out) {
  std::ofstream f(out, std::ios::trunc);
  if (!f) throw Error("cannot write report " + out.string());
  return f;
}

std::string decode_span(const Vocab& vocab, std::span<const TokenId> tokens) {
  return vocab.decode(std::vector<TokenId>(tokens.begin(), tokens.end()));
}

}  // namespace

EvalResult evaluate(std::span<const QuestionInstance> test, const Predictor& predictor, const Vocab& vocab,
                    const InferenceConfig& cfg, bool leave_one_out) {
  EvalResult result;
  result.records.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& q = test[i];
    InferenceConfig local = cfg;
    if (leave_one_out) local.exclude_question = i;
    const auto candidates = candidate_relations(q);
    Prediction p = predictor.predict(q.tokens, candidates, local);
    SampleRecord rec;
    rec.index = i;
    rec.question = vocab.decode(q.tokens);
    rec.gold = q.gold;
    rec.predicted = p.relation;
    rec.evidence = std::move(p.top);
    if (rec.correct()) ++result.correct;
    result.records.push_back(std::move(rec));
  }
  result.total = test.size();
  result.accuracy = result.total ? static_cast<double>(result.correct) / static_cast<double>(result.total) : 0.0;
  return result;
}

std::string format_accuracy(double accuracy) { return fmt::format("{:.2f}", accuracy * 100.0); }

std::string config_fingerprint(const std::vector<std::pair<std::string, std::string>>& config,
                               std::uint64_t checkpoint_digest) {
  std::string text;
  for (const auto& [k, v] : config) text += k + "=" + v + "\n";
  text += fmt::format("checkpoint={:016x}\n", checkpoint_digest);
  return fmt::format("{:016x}", fnv1a64(text));
}

void write_error_report(const EvalResult& result, const RelationTable& relations, const Vocab& vocab,
                        const Predictor& predictor, const std::filesystem::path& out) {
  auto f = open_report(out);
  f << kErrorReportHeader << '\n';
  for (const auto& rec : result.records) {
    if (rec.correct()) continue;
    std::string evidence;
    for (const auto& c : rec.evidence) {
      if (!evidence.empty()) evidence += " | ";
      evidence += fmt::format("{} [{}] F={:.4f}", decode_span(vocab, predictor.candidate_tokens(c)),
                              relations.at(c.relation).path, c.f);
    }
    f << tsv_field(rec.question) << '\t' << tsv_field(relations.at(rec.gold).path) << '\t'
      << tsv_field(relations.at(rec.predicted).path) << '\t' << tsv_field(evidence) << '\n';
  }
  if (!f) throw Error("write failed for report " + out.string());
}

std::vector<AmbiguousQuestion> find_ambiguous_questions(std::span<const QuestionInstance> train,
                                                        std::span<const QuestionInstance> test,
                                                        const Vocab& vocab) {
  struct Seen {
    std::set<RelationId> relations;
    std::size_t count = 0;
  };
  std::map<std::vector<TokenId>, Seen> by_text;
  for (const auto& q : train) {
    auto& s = by_text[q.tokens];
    s.relations.insert(q.gold);
    ++s.count;
  }
  std::vector<AmbiguousQuestion> out;
  std::set<std::vector<TokenId>> reported;
  for (const auto& q : test) {
    auto it = by_text.find(q.tokens);
    if (it == by_text.end() || it->second.relations.size() < 2) continue;
    if (!reported.insert(q.tokens).second) continue;
    out.push_back({vocab.decode(q.tokens), {it->second.relations.begin(), it->second.relations.end()},
                   it->second.count});
  }
  return out;
}

void write_ambiguity_report(std::span<const AmbiguousQuestion> rows, const RelationTable& relations,
                            const std::filesystem::path& out) {
  auto f = open_report(out);
  f << kAmbiguityReportHeader << '\n';
  for (const auto& row : rows) {
    std::string rels;
    for (RelationId r : row.relations) {
      if (!rels.empty()) rels += ' ';
      rels += relations.at(r).path;
    }
    f << tsv_field(row.question) << '\t' << tsv_field(rels) << '\t' << row.train_count << '\n';
  }
  if (!f) throw Error("write failed for report " + out.string());
}

AblationRun run_ablation(MatchMode mode, const AblationData& data, const ModelConfig& model_config,
                         const TrainConfig& train_config, const InferenceConfig& infer_config,
                         std::uint64_t init_seed) {
  const QuestionPool pools = build_question_pools(data.train);
  RelationModel model =
      RelationModel::create(model_config, mode, EmbeddingMatrix{data.embedding.table.clone()}, init_seed);
  const TrainingData td{data.train, data.valid, pools, data.relations};
  AblationRun run{train(std::move(model), td, train_config), {}};
  const Predictor predictor(run.training.best, data.train, pools, data.relations);
  run.eval = evaluate(data.test, predictor, data.vocab, infer_config);
  return run;
}

}  // namespace relmatch
