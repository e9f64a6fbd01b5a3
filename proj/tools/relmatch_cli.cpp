#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "relmatch/autodiff/gradcheck.hpp"
#include "relmatch/checkpoint.hpp"
#include "relmatch/dataset.hpp"
#include "relmatch/embedding.hpp"
#include "relmatch/error.hpp"
#include "relmatch/eval.hpp"
#include "relmatch/inference.hpp"
#include "relmatch/model.hpp"
#include "relmatch/rng.hpp"
#include "relmatch/trainer.hpp"

namespace fs = std::filesystem;
using namespace relmatch;

namespace {

std::map<std::string, std::string> read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path.string(), n, "expected key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

/// Flags win; config values fill options the command line left unset.
void apply_config(CLI::App& sub, const std::map<std::string, std::string>& config) {
  for (const auto& [key, value] : config) {
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (!opt) {
      spdlog::warn("config: key '{}' is not an option of '{}'; ignored", key, sub.get_name());
      continue;
    }
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

std::uint64_t seed_fallback() {
  if (const char* env = std::getenv("RELMATCH_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw Error(std::string("RELMATCH_SEED is not an unsigned integer: ") + env);
    }
  }
  return 1;
}

struct Splits {
  Vocab vocab;
  RelationTable relations;
  std::vector<QuestionInstance> train, valid, test;
};

Splits load_splits(const fs::path& dir) {
  Splits s;
  if (fs::exists(dir / "vocab.txt")) s.vocab = Vocab::load(dir / "vocab.txt");
  s.train = parse_benchmark_file(dir / "train.txt", s.vocab, s.relations);
  if (fs::exists(dir / "valid.txt")) s.valid = parse_benchmark_file(dir / "valid.txt", s.vocab, s.relations);
  // Test tokens join the vocabulary so they receive pretrained vectors.
  if (fs::exists(dir / "test.txt")) s.test = parse_benchmark_file(dir / "test.txt", s.vocab, s.relations);
  return s;
}

EmbeddingMatrix make_embedding(const Vocab& vocab, std::size_t dim, const std::string& glove, std::uint64_t seed) {
  if (glove.empty()) return init_embeddings(vocab, dim, seed);
  return load_pretrained(glove, vocab, dim, seed);
}

/// Appends OOV rows for tokens added to the vocabulary after training.
void extend_embedding(RelationModel& model, const Vocab& vocab, std::uint64_t seed) {
  const std::size_t rows = model.embedding.rows(), dim = model.embedding.dim();
  if (vocab.size() <= rows) return;
  std::vector<double> values(model.embedding.table.data().begin(), model.embedding.table.data().end());
  for (TokenId id = rows; id < vocab.size(); ++id) {
    const auto v = oov_vector(vocab.token(id), dim, seed);
    values.insert(values.end(), v.begin(), v.end());
  }
  spdlog::info("{} token(s) unseen at training time get OOV vectors", vocab.size() - rows);
  model.embedding.table = ad::Tensor::from({vocab.size(), dim}, std::move(values));
}

std::uint64_t config_u64(const std::map<std::string, std::string>& config, const std::string& key,
                         std::uint64_t fallback) {
  auto it = config.find(key);
  return it == config.end() ? fallback : std::stoull(it->second);
}

struct ModelFlags {
  ModelConfig config;
  void attach(CLI::App& sub) {
    sub.add_option("--embed-dim", config.embed_dim, "Word vector size")->capture_default_str();
    sub.add_option("--lstm-hidden", config.lstm_hidden, "Hidden units per LSTM direction")->capture_default_str();
    sub.add_option("--kernels", config.kernels, "Convolution kernels")->capture_default_str();
    sub.add_option("--kernel-size", config.kernel_size)->capture_default_str();
    sub.add_option("--pool", config.pool, "Dynamic pooling grid side")->capture_default_str();
    sub.add_option("--mlp-hidden", config.mlp_hidden)->capture_default_str();
    sub.add_option("--max-len", config.max_len, "Question length cap")->capture_default_str();
  }
};

struct TrainFlags {
  TrainConfig cfg;
  void attach(CLI::App& sub) {
    sub.add_option("--epochs", cfg.epochs)->capture_default_str();
    sub.add_option("--batch-size", cfg.batch_size)->capture_default_str();
    sub.add_option("--lr", cfg.learning_rate, "Adagrad learning rate")->capture_default_str();
    sub.add_option("--margin", cfg.margin, "Hinge margin")->capture_default_str();
    sub.add_option("--k-pos", cfg.k_positive, "Positives per anchor")->capture_default_str();
    sub.add_option("--k-neg", cfg.k_negative, "Negatives per anchor")->capture_default_str();
    sub.add_option("--patience", cfg.patience, "Epochs without improvement before stopping")->capture_default_str();
    sub.add_option("--valid-k", cfg.valid_k)->capture_default_str();
    sub.add_option("--valid-pool-cap", cfg.valid_pool_cap)->capture_default_str();
  }
};

// ---------------------------------------------------------------- prepare

struct PrepareArgs {
  std::string train, valid, test, relations, out, vocab_out;
};

int cmd_prepare(const PrepareArgs& a) {
  std::vector<std::string> relation_list;
  if (!a.relations.empty()) {
    std::ifstream in(a.relations);
    if (!in) throw Error("cannot open relation list " + a.relations);
    for (std::string line; std::getline(in, line);) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      relation_list.push_back(line);
    }
  }
  fs::create_directories(a.out);
  Vocab vocab;
  RelationTable relations;
  std::vector<QuestionInstance> train, test;
  for (const auto& [name, src] : {std::pair{"train", a.train}, {"valid", a.valid}, {"test", a.test}}) {
    if (src.empty()) continue;
    std::ifstream in(src);
    if (!in) throw Error("cannot open " + src);
    std::stringstream converted;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      converted << convert_published_line(line, n, src, relation_list) << '\n';
    }
    auto split = parse_benchmark(converted, src, vocab, relations);
    const fs::path dst = fs::path(a.out) / (std::string(name) + ".txt");
    std::ofstream out(dst);
    write_benchmark(out, split, vocab, relations);
    if (!out) throw Error("write failed for " + dst.string());
    fmt::print("{}: {} questions -> {}\n", name, split.size(), dst.string());
    if (std::string_view(name) == "train") train = std::move(split);
    if (std::string_view(name) == "test") test = std::move(split);
  }
  vocab.save(a.vocab_out.empty() ? fs::path(a.out) / "vocab.txt" : fs::path(a.vocab_out));
  std::ofstream rel_out(fs::path(a.out) / "relations.txt");
  for (const auto& label : relations.labels()) rel_out << label.path << '\n';
  fmt::print("vocabulary {} tokens, {} relations\n", vocab.size(), relations.size());
  if (!train.empty() && !test.empty()) {
    const auto ambiguous = find_ambiguous_questions(train, test, vocab);
    write_ambiguity_report(ambiguous, relations, fs::path(a.out) / "ambiguous.tsv");
    fmt::print("{} ambiguous test question(s) listed in {}\n", ambiguous.size(),
               (fs::path(a.out) / "ambiguous.tsv").string());
  }
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data_dir, glove, out, mode = "qq+qr";
  std::optional<std::uint64_t> seed;
  ModelFlags model;
  TrainFlags train;
};

int cmd_train(TrainArgs& a) {
  a.train.cfg.seed = a.seed.value_or(seed_fallback());
  const MatchMode mode = parse_mode(a.mode);
  Splits s = load_splits(a.data_dir);
  spdlog::info("train {} / valid {} questions, {} relations, vocabulary {}", s.train.size(), s.valid.size(),
               s.relations.size(), s.vocab.size());
  EmbeddingMatrix emb = make_embedding(s.vocab, a.model.config.embed_dim, a.glove, a.train.cfg.seed);
  RelationModel model = RelationModel::create(a.model.config, mode, std::move(emb), a.train.cfg.seed);
  const QuestionPool pools = build_question_pools(s.train);
  const TrainingData data{s.train, s.valid, pools, s.relations};
  TrainResult result = train(std::move(model), data, a.train.cfg);

  auto extra = a.train.cfg.to_pairs();
  extra.emplace_back("embedding.seed", std::to_string(a.train.cfg.seed));
  const Checkpoint ckpt = make_checkpoint(result.best, s.vocab, s.relations, s.train, result.steps, extra);
  save_checkpoint(ckpt, a.out);
  fmt::print("best epoch {} valid accuracy {} after {} steps; checkpoint {} ({:016x})\n", result.best_epoch,
             format_accuracy(std::max(result.best_valid_accuracy, 0.0)), result.steps, a.out,
             checkpoint_digest(ckpt));
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string checkpoint, test, mode, report_out;
  std::size_t k = 5;
  std::size_t pool_cap = 50;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  LoadedModel lm = instantiate(ckpt);
  if (!a.mode.empty()) lm.model.mode = parse_mode(a.mode);
  const auto test = parse_benchmark_file(a.test, lm.vocab, lm.relations);
  extend_embedding(lm.model, lm.vocab, config_u64(lm.config, "embedding.seed", 1));

  const Predictor predictor(lm.model, lm.train, lm.pools, lm.relations);
  InferenceConfig icfg;
  icfg.k = a.k;
  icfg.pool_cap = a.pool_cap;
  EvalResult result = evaluate(test, predictor, lm.vocab, icfg);
  auto config = ckpt.config;
  config.emplace_back("eval.mode", std::string(mode_name(lm.model.mode)));
  config.emplace_back("eval.k", std::to_string(a.k));
  config.emplace_back("eval.pool_cap", std::to_string(a.pool_cap));
  result.fingerprint = config_fingerprint(config, checkpoint_digest(ckpt));

  fmt::print("accuracy {} ({}/{}) mode {} k {} fingerprint {}\n", format_accuracy(result.accuracy), result.correct,
             result.total, mode_name(lm.model.mode), a.k, result.fingerprint);
  if (!a.report_out.empty()) {
    const fs::path report(a.report_out);
    write_error_report(result, lm.relations, lm.vocab, predictor, report);
    const auto ambiguous = find_ambiguous_questions(lm.train, test, lm.vocab);
    fs::path amb = report;
    amb.replace_extension(".ambiguous.tsv");
    write_ambiguity_report(ambiguous, lm.relations, amb);
    fs::path meta = report;
    meta.replace_extension(".meta.json");
    nlohmann::json j = {{"fingerprint", result.fingerprint},
                        {"accuracy", format_accuracy(result.accuracy)},
                        {"correct", result.correct},
                        {"total", result.total},
                        {"mode", std::string(mode_name(lm.model.mode))},
                        {"k", a.k},
                        {"error_report", report.string()},
                        {"ambiguity_report", amb.string()}};
    std::ofstream(meta) << j.dump(2) << '\n';
    fmt::print("{} error(s) in {}, {} ambiguous question(s) in {}\n", result.total - result.correct,
               report.string(), ambiguous.size(), amb.string());
  }
  return 0;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
  std::string checkpoint, question, entity;
  std::vector<std::string> candidates;
  std::size_t k = 5;
  std::size_t pool_cap = 50;
  bool explain = false;
};

int cmd_predict(const PredictArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  LoadedModel lm = instantiate(ckpt);
  const auto words = a.entity.empty() ? tokenize_question(a.question) : mask_entity(a.question, a.entity);
  const auto tokens = lm.vocab.encode(words, true);
  std::vector<RelationId> candidates;
  for (const auto& path : a.candidates) candidates.push_back(lm.relations.intern(normalize_relation_path(path), lm.vocab));
  extend_embedding(lm.model, lm.vocab, config_u64(lm.config, "embedding.seed", 1));

  const Predictor predictor(lm.model, lm.train, lm.pools, lm.relations);
  InferenceConfig icfg;
  icfg.k = a.k;
  icfg.pool_cap = a.pool_cap;
  icfg.restrict_to_candidates = !candidates.empty();
  const Prediction p = predictor.predict(tokens, candidates, icfg);
  fmt::print("{}\n", lm.relations.at(p.relation).path);
  if (a.explain) {
    for (std::size_t i = 0; i < p.top.size(); ++i) {
      const auto& c = p.top[i];
      const auto t = predictor.candidate_tokens(c);
      fmt::print("  {:>2}. F={:.6f} S1={:.6f} S2={:.6f} {} | {}\n", i + 1, c.f, c.s1, c.s2,
                 lm.relations.at(c.relation).path, lm.vocab.decode({t.begin(), t.end()}));
    }
  }
  return 0;
}

// ---------------------------------------------------------------- gradcheck

int cmd_gradcheck(std::size_t seeds, double tol) {
  const auto rows = ad::run_gradcheck_suite(seeds, tol);
  bool ok = true;
  fmt::print("{:<20} {:>6} {:>14}  {}\n", "primitive", "cases", "max_rel_err", "result");
  for (const auto& r : rows) {
    fmt::print("{:<20} {:>6} {:>14.3e}  {}\n", ad::primitive_name(r.op), r.cases, r.max_rel_error,
               r.passed ? "PASS" : "FAIL");
    ok = ok && r.passed;
  }
  fmt::print("{}\n", ok ? "all primitives pass" : "gradient check FAILED");
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------- ablate

struct AblateArgs {
  std::string data_dir, glove;
  std::vector<std::string> modes{"semantic-only", "lexical-only", "two-channel", "qq+qr"};
  double train_fraction = 1.0;
  std::size_t test_lines = 0;
  std::size_t seeds = 1;
  std::optional<std::uint64_t> seed;
  std::size_t k = 5;
  ModelFlags model;
  TrainFlags train;
};

int cmd_ablate(AblateArgs& a) {
  const std::uint64_t base = a.seed.value_or(seed_fallback());
  Splits s = load_splits(a.data_dir);
  if (s.test.empty()) throw Error("ablate: " + a.data_dir + "/test.txt is missing or empty");
  if (a.train_fraction <= 0.0 || a.train_fraction > 1.0) throw Error("ablate: --train-fraction must be in (0,1]");
  std::vector<MatchMode> modes;
  for (const auto& m : a.modes) modes.push_back(parse_mode(m));

  std::map<std::string, std::vector<double>> table;
  for (std::size_t rep = 0; rep < a.seeds; ++rep) {
    const std::uint64_t seed = derive_seed(base, {rep});
    Rng rng(seed);
    AblationData data;
    data.vocab = s.vocab;
    data.relations = s.relations;
    const auto n_train = static_cast<std::size_t>(a.train_fraction * static_cast<double>(s.train.size()) + 0.5);
    for (std::size_t i : rng.sample_distinct(s.train.size(), n_train)) data.train.push_back(s.train[i]);
    data.valid = s.valid;
    const std::size_t n_test = a.test_lines ? std::min(a.test_lines, s.test.size()) : s.test.size();
    for (std::size_t i : rng.sample_distinct(s.test.size(), n_test)) data.test.push_back(s.test[i]);
    data.embedding = make_embedding(s.vocab, a.model.config.embed_dim, a.glove, seed);
    TrainConfig tc = a.train.cfg;
    tc.seed = seed;
    InferenceConfig ic;
    ic.k = a.k;
    for (MatchMode mode : modes) {
      const AblationRun run = run_ablation(mode, data, a.model.config, tc, ic, seed);
      table[std::string(mode_name(mode))].push_back(run.eval.accuracy);
      fmt::print("seed {} mode {:<14} accuracy {}\n", seed, mode_name(mode), format_accuracy(run.eval.accuracy));
    }
  }
  fmt::print("{:<14} {:>8}  per-seed\n", "mode", "mean");
  for (MatchMode mode : modes) {
    const auto& accs = table[std::string(mode_name(mode))];
    double mean = 0;
    std::string per;
    for (double x : accs) {
      mean += x / static_cast<double>(accs.size());
      per += " " + format_accuracy(x);
    }
    fmt::print("{:<14} {:>8} {}\n", mode_name(mode), format_accuracy(mean), per);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relation extraction by question-question and question-relation matching"};
  app.require_subcommand(1);
  std::string config_path;
  std::string log_level = "info";
  app.add_option("--config", config_path, "Flat key=value file; flags override it")->check(CLI::ExistingFile);
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "Convert raw splits to the benchmark layout and build the vocabulary");
  prepare->add_option("--train", prep.train, "Raw training split")->required();
  prepare->add_option("--valid", prep.valid, "Raw validation split");
  prepare->add_option("--test", prep.test, "Raw test split");
  prepare->add_option("--relations", prep.relations, "Relation list for index-based raw files");
  prepare->add_option("--out", prep.out, "Output directory")->required();
  prepare->add_option("--vocab-out", prep.vocab_out, "Vocabulary path (default: <out>/vocab.txt)");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  train_cmd->add_option("--data-dir", tr.data_dir, "Directory written by prepare")->required();
  train_cmd->add_option("--glove", tr.glove, "Pretrained vectors (token v1 ... vd per line)");
  train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
  train_cmd->add_option("--mode", tr.mode, "semantic-only, lexical-only, two-channel, qq-only or qq+qr")
      ->capture_default_str();
  train_cmd->add_option("--seed", tr.seed, "Global seed (default: $RELMATCH_SEED or 1)");
  tr.model.attach(*train_cmd);
  tr.train.attach(*train_cmd);

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Accuracy of a checkpoint on a benchmark file");
  eval_cmd->add_option("--checkpoint", ev.checkpoint)->required();
  eval_cmd->add_option("--test", ev.test, "Benchmark-layout test file")->required();
  eval_cmd->add_option("--mode", ev.mode, "Override the checkpoint's matching mode at inference");
  eval_cmd->add_option("--k", ev.k, "Voting neighbours")->capture_default_str();
  eval_cmd->add_option("--pool-cap", ev.pool_cap, "Pooled questions scored per relation; 0 scores all")
      ->capture_default_str();
  eval_cmd->add_option("--report-out", ev.report_out, "Error report TSV path");

  PredictArgs pr;
  auto* predict = app.add_subcommand("predict", "Predict the relation of one question");
  predict->add_option("--checkpoint", pr.checkpoint)->required();
  predict->add_option("--question", pr.question, "Question text; mark the entity with <e> or pass --entity")
      ->required();
  predict->add_option("--entity", pr.entity, "Entity mention to mask");
  predict->add_option("--candidates", pr.candidates, "Comma-separated relation paths (default: all relations)")
      ->delimiter(',');
  predict->add_option("--pool-cap", pr.pool_cap)->capture_default_str();
  predict->add_option("--k", pr.k)->capture_default_str();
  predict->add_flag("--explain", pr.explain, "Print the top-k matched questions with their scores");

  std::size_t gc_seeds = 20;
  double gc_tol = 1e-4;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every autodiff primitive");
  gradcheck->add_option("--seeds", gc_seeds)->capture_default_str();
  gradcheck->add_option("--tol", gc_tol)->capture_default_str();

  AblateArgs ab;
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate several matching modes on subsamples");
  ablate->add_option("--data-dir", ab.data_dir)->required();
  ablate->add_option("--glove", ab.glove);
  ablate->add_option("--modes", ab.modes)->delimiter(',')->capture_default_str();
  ablate->add_option("--train-fraction", ab.train_fraction)->capture_default_str();
  ablate->add_option("--test-lines", ab.test_lines, "0 evaluates every test line")->capture_default_str();
  ablate->add_option("--seeds", ab.seeds, "Repetitions with derived seeds")->capture_default_str();
  ablate->add_option("--seed", ab.seed, "Base seed (default: $RELMATCH_SEED or 1)");
  ablate->add_option("--k", ab.k)->capture_default_str();
  ab.model.attach(*ablate);
  ab.train.attach(*ablate);

  CLI11_PARSE(app, argc, argv);

  try {
    spdlog::set_level(spdlog::level::from_str(log_level));
    CLI::App* sub = app.get_subcommands().front();
    if (!config_path.empty()) apply_config(*sub, read_config_file(config_path));
    if (sub == prepare) return cmd_prepare(prep);
    if (sub == train_cmd) return cmd_train(tr);
    if (sub == eval_cmd) return cmd_evaluate(ev);
    if (sub == predict) return cmd_predict(pr);
    if (sub == gradcheck) return cmd_gradcheck(gc_seeds, gc_tol);
    if (sub == ablate) return cmd_ablate(ab);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
