#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "relmatch/autodiff/tensor.hpp"
#include "relmatch/vocab.hpp"

namespace relmatch {

inline constexpr double kOovInitRange = 0.25;

/// |V| x d table. Row 0 (<pad>) is zero and never receives gradient.
struct EmbeddingMatrix {
  ad::Tensor table;

  std::size_t rows() const { return table.dim(0); }
  std::size_t dim() const { return table.dim(1); }
};

/// Uniform [-0.25, 0.25) vector seeded from the token string, so the result
/// does not depend on vocabulary insertion order.
std::vector<double> oov_vector(std::string_view token, std::size_t dim, std::uint64_t seed);

/// Every row initialized with oov_vector (pad row zero).
EmbeddingMatrix init_embeddings(const Vocab& vocab, std::size_t dim, std::uint64_t seed);

struct PretrainedStats {
  std::size_t lines = 0;
  std::size_t matched = 0;
};

/// Reads a whitespace-delimited `token v1 ... vd` file. Vocabulary tokens
/// found in the file take its row verbatim; the rest get oov_vector.
EmbeddingMatrix load_pretrained(const std::filesystem::path& path, const Vocab& vocab, std::size_t dim,
                                std::uint64_t seed, PretrainedStats* stats = nullptr);

}  // namespace relmatch
