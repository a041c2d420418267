#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace wmaudit {

using TokenId = std::int32_t;

inline constexpr std::string_view kUnkToken = "<unk>";

/// Word-level tokenizer: whitespace separates words and every ASCII
/// punctuation character becomes a token of its own. Bytes >= 0x80 are
/// treated as word characters, so UTF-8 text passes through intact.
std::vector<std::string> split_tokens(std::string_view text);

/// ASCII lowercasing; other bytes are left untouched.
std::string ascii_lower(std::string_view text);

/// Token ids plus the text they were produced from. `source_text` may be
/// empty for generated sequences.
struct TokenSeq {
  std::vector<TokenId> ids;
  std::string source_text;

  std::size_t size() const noexcept { return ids.size(); }
  bool empty() const noexcept { return ids.empty(); }
  std::span<const TokenId> view() const noexcept { return ids; }
};

/// Dense token table with an UNK entry and a lowercase projection.
class Vocabulary {
 public:
  /// Takes an explicit token list. `unk` must be one of the tokens.
  /// lowercase_of(i) maps to the lowercased token when it exists, else i.
  explicit Vocabulary(std::vector<std::string> tokens,
                      std::string_view unk = kUnkToken);

  /// Collects tokens in first-occurrence order, appends the lowercase forms
  /// that are not yet present (in the order their sources were seen), then
  /// appends UNK. Throws std::invalid_argument on an empty corpus.
  static Vocabulary build(std::span<const std::string> corpus);

  std::size_t size() const noexcept { return tokens_.size(); }
  TokenId unk_id() const noexcept { return unk_id_; }

  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  /// Id of `token`, or unk_id() when absent.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;

  TokenId lowercase_of(TokenId id) const { return lowercase_map_.at(static_cast<std::size_t>(id)); }

  TokenSeq encode(std::string_view text) const;
  std::vector<TokenId> lowercase(std::span<const TokenId> ids) const;

  /// Joins tokens with single spaces, attaching closing punctuation to the
  /// preceding token and opening brackets to the following one.
  /// encode(decode(ids)).ids == ids for UNK-free input.
  std::string decode(std::span<const TokenId> ids) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::vector<TokenId> lowercase_map_;
  TokenId unk_id_ = 0;
};

}  // namespace wmaudit
