#include "relmatch/vocab.hpp"

#include <fstream>

#include "relmatch/error.hpp"

namespace relmatch {

Vocab::Vocab() {
  for (std::string_view t : {kPadToken, kUnkToken, kEntityToken}) add(t);
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < 3 || tokens[kPadId] != kPadToken || tokens[kUnkId] != kUnkToken ||
      tokens[kEntityId] != kEntityToken) {
    throw Error("vocab: reserved tokens <pad>, <unk>, <e> must occupy ids 0..2");
  }
  Vocab v;
  for (std::size_t i = 3; i < tokens.size(); ++i) {
    if (v.add(tokens[i]) != i) throw Error("vocab: duplicate token '" + tokens[i] + "'");
  }
  return v;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("vocab: cannot open " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return from_tokens(tokens);
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("vocab: cannot write " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
  if (!out) throw Error("vocab: write failed for " + path.string());
}

TokenId Vocab::add(std::string_view token) {
  auto [it, inserted] = index_.emplace(std::string(token), tokens_.size());
  if (inserted) tokens_.emplace_back(token);
  return it->second;
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocab::lookup(std::string_view token) const { return find(token).value_or(kUnkId); }

std::vector<TokenId> Vocab::encode(const std::vector<std::string>& tokens, bool extend) {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(extend ? add(t) : lookup(t));
  return ids;
}

std::string Vocab::decode(const std::vector<TokenId>& ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += token(ids[i]);
  }
  return out;
}

}  // namespace relmatch
