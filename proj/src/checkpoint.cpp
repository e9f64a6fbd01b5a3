#include "relmatch/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "relmatch/error.hpp"
#include "relmatch/rng.hpp"

namespace relmatch {
namespace {

constexpr std::size_t kMagicLen = 5;

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(checked(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  static std::uint32_t checked(std::size_t n) {
    if (n > UINT32_MAX) throw CheckpointError("checkpoint: field too large");
    return static_cast<std::uint32_t>(n);
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8, "u64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n, "string");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  /// Element count guarded against the bytes left, so a corrupt count
  /// cannot trigger a huge allocation.
  std::uint32_t count(std::size_t min_bytes_each, const char* what) {
    const std::uint32_t n = u32();
    if (min_bytes_each && n > (bytes_.size() - pos_) / min_bytes_each) {
      throw CheckpointError(std::string("checkpoint corrupt: ") + what + " count " + std::to_string(n) +
                            " exceeds remaining bytes");
    }
    return n;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(std::string("checkpoint truncated while reading ") + what + " at byte " +
                            std::to_string(pos_));
    }
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint64_t digest_bytes(std::span<const std::uint8_t> bytes) {
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace

std::map<std::string, std::string> Checkpoint::config_map() const { return {config.begin(), config.end()}; }

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.raw(std::string_view(kCheckpointMagic, kMagicLen));
  w.u64(ckpt.step);
  w.u32(Writer::checked(ckpt.config.size()));
  for (const auto& [k, v] : ckpt.config) {
    w.str(k);
    w.str(v);
  }
  w.u32(Writer::checked(ckpt.vocab.size()));
  for (const auto& t : ckpt.vocab) w.str(t);
  w.u32(Writer::checked(ckpt.relations.size()));
  for (const auto& r : ckpt.relations) w.str(r);
  w.u32(Writer::checked(ckpt.pool.size()));
  for (const auto& e : ckpt.pool) {
    w.u32(Writer::checked(e.gold));
    w.u32(Writer::checked(e.tokens.size()));
    for (TokenId t : e.tokens) w.u32(Writer::checked(t));
  }
  w.u32(Writer::checked(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (ad::shape_numel(t.shape) != t.values.size()) {
      throw CheckpointError("checkpoint: tensor '" + t.name + "' values do not match its shape");
    }
    w.str(t.name);
    w.u32(Writer::checked(t.shape.size()));
    for (std::size_t d : t.shape) w.u64(d);
    for (double v : t.values) w.f64(v);
  }
  w.u64(digest_bytes(w.bytes()));
  return std::move(w.bytes());
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagicLen || std::memcmp(bytes.data(), "RELM", 4) != 0) {
    throw CheckpointError("checkpoint: bad magic, not a checkpoint file");
  }
  if (bytes[4] != static_cast<std::uint8_t>(kCheckpointMagic[4])) {
    throw CheckpointError(std::string("checkpoint: unsupported format version '") + static_cast<char>(bytes[4]) +
                          "', expected '" + kCheckpointMagic[4] + "'");
  }
  if (bytes.size() < kMagicLen + 8) throw CheckpointError("checkpoint truncated: missing checksum");
  const auto body = bytes.first(bytes.size() - 8);
  Reader tail(bytes.last(8));
  if (tail.u64() != digest_bytes(body)) {
    throw CheckpointError("checkpoint corrupt or truncated: checksum mismatch");
  }

  Reader r(body.subspan(kMagicLen));
  Checkpoint c;
  c.step = r.u64();
  for (std::uint32_t n = r.count(8, "config"), i = 0; i < n; ++i) {
    std::string k = r.str();
    c.config.emplace_back(std::move(k), r.str());
  }
  for (std::uint32_t n = r.count(4, "vocab"), i = 0; i < n; ++i) c.vocab.push_back(r.str());
  for (std::uint32_t n = r.count(4, "relation"), i = 0; i < n; ++i) c.relations.push_back(r.str());
  for (std::uint32_t n = r.count(8, "pool"), i = 0; i < n; ++i) {
    PoolEntry e;
    e.gold = r.u32();
    const std::uint32_t len = r.count(4, "pool token");
    e.tokens.reserve(len);
    for (std::uint32_t k = 0; k < len; ++k) e.tokens.push_back(r.u32());
    c.pool.push_back(std::move(e));
  }
  for (std::uint32_t n = r.count(8, "tensor"), i = 0; i < n; ++i) {
    NamedArray t;
    t.name = r.str();
    const std::uint32_t rank = r.count(8, "dim");
    for (std::uint32_t k = 0; k < rank; ++k) t.shape.push_back(static_cast<std::size_t>(r.u64()));
    const std::size_t numel = ad::shape_numel(t.shape);
    if (numel > (body.size() - kMagicLen - r.pos()) / 8) {
      throw CheckpointError("checkpoint truncated in tensor '" + t.name + "'");
    }
    t.values.resize(numel);
    for (double& v : t.values) v = r.f64();
    c.tensors.push_back(std::move(t));
  }
  if (kMagicLen + r.pos() != body.size()) throw CheckpointError("checkpoint corrupt: trailing bytes");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("checkpoint: cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

std::uint64_t checkpoint_digest(const Checkpoint& ckpt) { return digest_bytes(serialize_checkpoint(ckpt)); }

Checkpoint make_checkpoint(const RelationModel& model, const Vocab& vocab, const RelationTable& relations,
                           std::span<const QuestionInstance> train, std::uint64_t step,
                           std::vector<std::pair<std::string, std::string>> extra_config) {
  Checkpoint c;
  c.step = step;
  c.config = model.config.to_pairs();
  c.config.emplace_back("mode", std::string(mode_name(model.mode)));
  for (auto& kv : extra_config) c.config.push_back(std::move(kv));
  c.vocab = vocab.tokens();
  for (const auto& label : relations.labels()) c.relations.push_back(label.path);
  for (const auto& q : train) c.pool.push_back({q.gold, q.tokens});
  for (const auto& p : model.named_params()) {
    c.tensors.push_back({p.name, p.tensor.shape(), {p.tensor.data().begin(), p.tensor.data().end()}});
  }
  return c;
}

void restore_params(const Checkpoint& ckpt, RelationModel& model) {
  for (auto& p : model.named_params()) {
    auto it = std::find_if(ckpt.tensors.begin(), ckpt.tensors.end(),
                           [&](const NamedArray& t) { return t.name == p.name; });
    if (it == ckpt.tensors.end()) throw CheckpointError("checkpoint: missing tensor '" + p.name + "'");
    if (it->shape != p.tensor.shape()) {
      throw ShapeError("checkpoint: tensor '" + p.name + "' has shape " + ad::shape_str(it->shape) +
                       ", model expects " + ad::shape_str(p.tensor.shape()));
    }
    std::copy(it->values.begin(), it->values.end(), p.tensor.data().begin());
  }
}

LoadedModel instantiate(const Checkpoint& ckpt) {
  LoadedModel out;
  out.config = ckpt.config_map();
  out.vocab = Vocab::from_tokens(ckpt.vocab);
  for (std::size_t i = 0; i < ckpt.relations.size(); ++i) {
    if (out.relations.intern(ckpt.relations[i], out.vocab) != i) {
      throw CheckpointError("checkpoint: duplicate relation '" + ckpt.relations[i] + "'");
    }
  }
  if (out.vocab.size() != ckpt.vocab.size()) {
    throw CheckpointError("checkpoint: relation words missing from the vocabulary");
  }
  for (const auto& e : ckpt.pool) {
    if (e.gold >= out.relations.size()) throw CheckpointError("checkpoint: pool entry with unknown relation");
    for (TokenId t : e.tokens) {
      if (t >= out.vocab.size()) throw CheckpointError("checkpoint: pool entry with unknown token");
    }
    out.train.push_back({e.tokens, e.gold, {}});
  }
  out.pools = build_question_pools(out.train);

  const ModelConfig mc = ModelConfig::from_map(out.config);
  auto mode_it = out.config.find("mode");
  const MatchMode mode = mode_it == out.config.end() ? MatchMode::qq_qr : parse_mode(mode_it->second);
  EmbeddingMatrix placeholder{ad::Tensor::zeros({out.vocab.size(), mc.embed_dim}, true)};
  out.model = RelationModel::create(mc, mode, std::move(placeholder), 0);
  restore_params(ckpt, out.model);
  return out;
}

}  // namespace relmatch
