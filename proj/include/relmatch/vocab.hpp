#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace relmatch {

using TokenId = std::size_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kEntityId = 2;
inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kEntityToken = "<e>";

/// Dense token <-> id mapping. Ids 0..2 are reserved for <pad>, <unk>, <e>.
class Vocab {
 public:
  Vocab();

  /// Rebuilds a vocabulary from its id-ordered token list.
  static Vocab from_tokens(const std::vector<std::string>& tokens);
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  TokenId add(std::string_view token);
  std::optional<TokenId> find(std::string_view token) const;
  /// Unknown tokens map to <unk>.
  TokenId lookup(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(id); }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<TokenId> encode(const std::vector<std::string>& tokens, bool extend);
  std::string decode(const std::vector<TokenId>& ids) const;

 private:
  std::unordered_map<std::string, TokenId> index_;
  std::vector<std::string> tokens_;
};

}  // namespace relmatch
