#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "relmatch/autodiff/tensor.hpp"
#include "relmatch/dataset.hpp"
#include "relmatch/model.hpp"
#include "relmatch/vocab.hpp"

namespace relmatch {

/// Binary layout, all integers little-endian:
///
///   "RELM1"                                  magic + format version
///   u64 step
///   u32 n, n x (str key, str value)          config snapshot
///   u32 n, n x str                           vocabulary, id order
///   u32 n, n x str                           relation paths, id order
///   u32 n, n x (u32 gold, u32 len, len x u32) question pool (train set)
///   u32 n, n x (str name, u32 rank, rank x u64 dim, numel x f64)
///   u64 FNV-1a of every preceding byte
///
/// where str = u32 byte length + UTF-8 bytes.
inline constexpr char kCheckpointMagic[] = "RELM1";

struct NamedArray {
  std::string name;
  ad::Shape shape;
  std::vector<double> values;
};

struct PoolEntry {
  RelationId gold = 0;
  std::vector<TokenId> tokens;
};

struct Checkpoint {
  std::uint64_t step = 0;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::string> vocab;
  std::vector<std::string> relations;
  std::vector<PoolEntry> pool;
  std::vector<NamedArray> tensors;

  std::map<std::string, std::string> config_map() const;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
/// Throws CheckpointError on a bad magic, version, checksum or truncation.
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::uint64_t checkpoint_digest(const Checkpoint& ckpt);

Checkpoint make_checkpoint(const RelationModel& model, const Vocab& vocab, const RelationTable& relations,
                           std::span<const QuestionInstance> train, std::uint64_t step,
                           std::vector<std::pair<std::string, std::string>> extra_config = {});

/// Copies checkpoint tensors into `model`. Throws ShapeError naming the
/// tensor on any shape mismatch, CheckpointError on a missing tensor.
void restore_params(const Checkpoint& ckpt, RelationModel& model);

/// Everything needed for inference, rebuilt from a checkpoint.
struct LoadedModel {
  Vocab vocab;
  RelationTable relations;
  std::vector<QuestionInstance> train;
  QuestionPool pools;
  RelationModel model;
  std::map<std::string, std::string> config;
};

LoadedModel instantiate(const Checkpoint& ckpt);

}  // namespace relmatch
