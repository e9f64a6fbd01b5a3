#include "relmatch/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include <spdlog/spdlog.h>

#include "relmatch/error.hpp"
#include "relmatch/rng.hpp"

namespace relmatch {
namespace {

bool is_split_punct(char c) { return c != '\'' && std::ispunct(static_cast<unsigned char>(c)); }

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void push_word(std::string_view piece, std::vector<std::string>& out) {
  std::size_t b = 0, e = piece.size();
  while (b < e && is_split_punct(piece[b])) out.emplace_back(1, piece[b++]);
  std::size_t tail = e;
  while (tail > b && is_split_punct(piece[tail - 1])) --tail;
  if (tail > b) out.emplace_back(piece.substr(b, tail - b));
  for (std::size_t i = tail; i < e; ++i) out.emplace_back(1, piece[i]);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) parts.push_back(s.substr(i, j - i));
    i = j;
  }
  return parts;
}

}  // namespace

RelationId RelationTable::intern(std::string_view path, Vocab& vocab) {
  if (auto id = find(path)) return *id;
  RelationLabel label;
  label.id = labels_.size();
  label.path = std::string(path);
  label.words = vocab.encode(tokenize_relation(path), true);
  index_.emplace(label.path, label.id);
  labels_.push_back(std::move(label));
  return labels_.back().id;
}

std::optional<RelationId> RelationTable::find(std::string_view path) const {
  auto it = index_.find(std::string(path));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> tokenize_question(std::string_view text) {
  std::vector<std::string> out;
  for (std::string_view raw : split_ws(text)) {
    const std::string piece = lower(raw);
    std::string_view rest = piece;
    for (;;) {
      const std::size_t at = rest.find(kEntityToken);
      if (at == std::string_view::npos) {
        push_word(rest, out);
        break;
      }
      push_word(rest.substr(0, at), out);
      out.emplace_back(kEntityToken);
      rest = rest.substr(at + kEntityToken.size());
    }
  }
  return out;
}

std::vector<std::string> tokenize_relation(std::string_view path) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::exchange(current, {}));
  };
  for (char c : path) {
    if (c == '/' || c == '_') {
      flush();
    } else {
      current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  flush();
  const bool has_alnum = std::any_of(path.begin(), path.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c));
  });
  if (words.empty() || !has_alnum) throw Error("relation path has no words: '" + std::string(path) + "'");
  return words;
}

std::vector<std::string> mask_entity(std::string_view question, std::string_view entity) {
  std::vector<std::string> tokens = tokenize_question(question);
  const std::vector<std::string> span = tokenize_question(entity);
  if (span.empty()) throw Error("mask_entity: empty entity");
  auto it = std::search(tokens.begin(), tokens.end(), span.begin(), span.end());
  if (it == tokens.end()) {
    if (std::find(tokens.begin(), tokens.end(), kEntityToken) != tokens.end()) return tokens;
    throw Error("mask_entity: entity '" + std::string(entity) + "' not found in '" + std::string(question) + "'");
  }
  it = tokens.erase(it, it + static_cast<std::ptrdiff_t>(span.size()));
  tokens.insert(it, std::string(kEntityToken));
  return tokens;
}

QuestionInstance parse_benchmark_line(std::string_view line, std::size_t line_no, const std::string& source,
                                      Vocab& vocab, RelationTable& relations) {
  const auto fields = split(line, '\t');
  if (fields.size() != 3) {
    throw ParseError(source, line_no, "expected 3 tab-separated fields, got " + std::to_string(fields.size()));
  }
  const auto gold_path = split_ws(fields[0]);
  if (gold_path.size() != 1) throw ParseError(source, line_no, "gold relation field must hold one path");
  QuestionInstance q;
  try {
    q.gold = relations.intern(gold_path[0], vocab);
    for (std::string_view neg : split_ws(fields[1])) {
      const RelationId id = relations.intern(neg, vocab);
      if (id == q.gold) {
        spdlog::warn("{}:{}: gold relation listed among negatives; dropped", source, line_no);
        continue;
      }
      if (std::find(q.negatives.begin(), q.negatives.end(), id) == q.negatives.end()) q.negatives.push_back(id);
    }
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(source, line_no, e.what());
  }
  q.tokens = vocab.encode(tokenize_question(fields[2]), true);
  if (q.tokens.empty()) throw ParseError(source, line_no, "empty question");
  return q;
}

std::vector<QuestionInstance> parse_benchmark(std::istream& in, const std::string& source, Vocab& vocab,
                                              RelationTable& relations) {
  std::vector<QuestionInstance> out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t unmasked = 0, multi = 0, first_unmasked = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    QuestionInstance q = parse_benchmark_line(line, line_no, source, vocab, relations);
    const auto entities = std::count(q.tokens.begin(), q.tokens.end(), kEntityId);
    if (entities == 0 && unmasked++ == 0) first_unmasked = line_no;
    if (entities > 1) ++multi;
    out.push_back(std::move(q));
  }
  if (unmasked) {
    spdlog::warn("{}: {} question(s) without <e> kept (first at line {})", source, unmasked, first_unmasked);
  }
  if (multi) spdlog::warn("{}: {} question(s) with more than one <e>", source, multi);
  return out;
}

std::vector<QuestionInstance> parse_benchmark_file(const std::filesystem::path& path, Vocab& vocab,
                                                   RelationTable& relations) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open benchmark file " + path.string());
  return parse_benchmark(in, path.string(), vocab, relations);
}

void write_benchmark(std::ostream& out, std::span<const QuestionInstance> instances, const Vocab& vocab,
                     const RelationTable& relations) {
  for (const auto& q : instances) {
    out << relations.at(q.gold).path << '\t';
    for (std::size_t i = 0; i < q.negatives.size(); ++i) {
      if (i) out << ' ';
      out << relations.at(q.negatives[i]).path;
    }
    out << '\t' << vocab.decode(q.tokens) << '\n';
  }
}

std::string normalize_relation_path(std::string_view raw) {
  std::string path(raw);
  if (path.find('/') == std::string::npos) std::replace(path.begin(), path.end(), '.', '/');
  if (path.empty() || path.front() != '/') path.insert(path.begin(), '/');
  return path;
}

std::string convert_published_line(std::string_view line, std::size_t line_no, const std::string& source,
                                   const std::vector<std::string>& relation_list) {
  const auto fields = split(line, '\t');
  if (fields.size() != 3) {
    throw ParseError(source, line_no, "expected 3 tab-separated fields, got " + std::to_string(fields.size()));
  }
  const bool numeric = !fields[0].empty() && std::all_of(fields[0].begin(), fields[0].end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c));
  });
  auto resolve = [&](std::string_view idx) -> std::string {
    std::size_t n = 0;
    for (char c : idx) {
      if (!std::isdigit(static_cast<unsigned char>(c))) {
        throw ParseError(source, line_no, "bad relation index '" + std::string(idx) + "'");
      }
      n = n * 10 + static_cast<std::size_t>(c - '0');
    }
    if (n == 0 || n > relation_list.size()) {
      throw ParseError(source, line_no, "relation index " + std::to_string(n) + " outside relation list");
    }
    return normalize_relation_path(relation_list[n - 1]);
  };

  std::string question(fields[2]);
  for (std::string_view marker : {"#head_entity#"}) {
    for (std::size_t at; (at = question.find(marker)) != std::string::npos;) {
      question.replace(at, marker.size(), kEntityToken);
    }
  }
  if (!numeric) return std::string(fields[0]) + '\t' + std::string(fields[1]) + '\t' + question;

  std::string out = resolve(fields[0]);
  out += '\t';
  bool first = true;
  for (std::string_view neg : split_ws(fields[1])) {
    if (neg == "noNegativeAnswer") continue;
    if (!first) out += ' ';
    out += resolve(neg);
    first = false;
  }
  out += '\t';
  out += question;
  return out;
}

const std::vector<std::size_t>* QuestionPool::find(RelationId r) const {
  auto it = members.find(r);
  return it == members.end() ? nullptr : &it->second;
}

std::size_t QuestionPool::total() const {
  std::size_t n = 0;
  for (const auto& [r, m] : members) n += m.size();
  return n;
}

QuestionPool build_question_pools(std::span<const QuestionInstance> train) {
  QuestionPool pools;
  for (std::size_t i = 0; i < train.size(); ++i) pools.members[train[i].gold].push_back(i);
  return pools;
}

std::span<const TokenId> question_tokens(const PoolQuestion& q, std::span<const QuestionInstance> train,
                                         const RelationTable& relations) {
  if (q.index) return train[*q.index].tokens;
  return relations.at(q.relation).words;
}

std::vector<TrainingTriple> sample_training_triples(std::size_t anchor, std::span<const QuestionInstance> train,
                                                    const QuestionPool& pools, const RelationTable& relations,
                                                    const SamplerConfig& cfg, std::uint64_t stream) {
  if (cfg.k_positive == 0 || cfg.k_negative == 0) throw Error("sampler: k_positive and k_negative must be >= 1");
  const QuestionInstance& a = train[anchor];
  Rng rng(derive_seed(cfg.seed, {stream, anchor}));

  std::vector<PoolQuestion> positives;
  std::vector<std::size_t> gold_members;
  if (const auto* pool = pools.find(a.gold)) {
    for (std::size_t idx : *pool) {
      if (idx != anchor) gold_members.push_back(idx);
    }
  }
  if (!gold_members.empty()) {
    for (std::size_t pick : rng.sample_distinct(gold_members.size(), cfg.k_positive)) {
      positives.push_back({gold_members[pick], a.gold});
    }
  } else if (cfg.relation_word_fallback) {
    positives.push_back({std::nullopt, a.gold});
  } else {
    throw Error("sampler: empty question pool for gold relation '" + relations.at(a.gold).path + "'");
  }

  std::vector<PoolQuestion> negatives;
  if (!a.negatives.empty()) {
    // Union of the negative relations' pools; poolless relations contribute
    // their synthetic relation-word question.
    struct Segment {
      RelationId relation;
      const std::vector<std::size_t>* members;
      std::size_t offset;
    };
    std::vector<Segment> segments;
    std::size_t total = 0;
    for (RelationId r : a.negatives) {
      const auto* pool = pools.find(r);
      if (!pool && !cfg.relation_word_fallback) continue;
      segments.push_back({r, pool, total});
      total += pool ? pool->size() : 1;
    }
    for (std::size_t pick : rng.sample_distinct(total, cfg.k_negative)) {
      auto seg = std::upper_bound(segments.begin(), segments.end(), pick,
                                  [](std::size_t v, const Segment& s) { return v < s.offset; });
      --seg;
      if (seg->members) {
        negatives.push_back({(*seg->members)[pick - seg->offset], seg->relation});
      } else {
        negatives.push_back({std::nullopt, seg->relation});
      }
    }
  } else if (train.size() > 1) {
    // No negative labels: draw from all questions of other relations.
    std::set<std::size_t> chosen;
    const std::size_t budget = 32 * cfg.k_negative;
    for (std::size_t tries = 0; tries < budget && chosen.size() < cfg.k_negative; ++tries) {
      const std::size_t idx = rng.uniform_index(train.size());
      if (train[idx].gold == a.gold || !chosen.insert(idx).second) continue;
      negatives.push_back({idx, train[idx].gold});
    }
  }

  std::vector<TrainingTriple> triples;
  triples.reserve(positives.size());
  for (const auto& p : positives) triples.push_back({anchor, p, negatives});
  return triples;
}

}  // namespace relmatch
