#include "relmatch/embedding.hpp"

#include <charconv>
#include <fstream>
#include <string>

#include <spdlog/spdlog.h>

#include "relmatch/error.hpp"
#include "relmatch/rng.hpp"

namespace relmatch {

std::vector<double> oov_vector(std::string_view token, std::size_t dim, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {fnv1a64(token)}));
  std::vector<double> v(dim);
  for (double& x : v) x = rng.uniform(-kOovInitRange, kOovInitRange);
  return v;
}

EmbeddingMatrix init_embeddings(const Vocab& vocab, std::size_t dim, std::uint64_t seed) {
  std::vector<double> values(vocab.size() * dim, 0.0);
  for (TokenId id = 0; id < vocab.size(); ++id) {
    if (id == kPadId) continue;
    auto row = oov_vector(vocab.token(id), dim, seed);
    std::copy(row.begin(), row.end(), values.begin() + id * dim);
  }
  return {ad::Tensor::from({vocab.size(), dim}, std::move(values), true)};
}

EmbeddingMatrix load_pretrained(const std::filesystem::path& path, const Vocab& vocab, std::size_t dim,
                                std::uint64_t seed, PretrainedStats* stats) {
  std::ifstream in(path);
  if (!in) throw Error("embeddings: cannot open " + path.string());
  EmbeddingMatrix emb = init_embeddings(vocab, dim, seed);
  auto table = emb.table.data();
  std::vector<bool> seen(vocab.size(), false);
  PretrainedStats local;
  std::string line;
  std::vector<double> row(dim);
  while (std::getline(in, line)) {
    ++local.lines;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t cut = line.find(' ');
    if (cut == std::string::npos || cut == 0) {
      throw ParseError(path.string(), local.lines, "expected `token v1 ... v" + std::to_string(dim) + "`");
    }
    std::size_t count = 0;
    const char* p = line.data() + cut;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) throw ParseError(path.string(), local.lines, "bad number in vector");
      if (count < dim) row[count] = v;
      ++count;
      p = next;
    }
    if (count != dim) {
      throw ParseError(path.string(), local.lines,
                       "vector has " + std::to_string(count) + " dims, expected " + std::to_string(dim));
    }
    auto id = vocab.find(std::string_view(line.data(), cut));
    if (!id || *id == kPadId || seen[*id]) continue;
    seen[*id] = true;
    ++local.matched;
    std::copy(row.begin(), row.end(), table.begin() + *id * dim);
  }
  emb.table.check_finite("embeddings " + path.string());
  spdlog::info("embeddings: {} of {} vocabulary tokens found in {}", local.matched, vocab.size(), path.string());
  if (stats) *stats = local;
  return emb;
}

}  // namespace relmatch
