#include "wmaudit/vocab.hpp"

#include <stdexcept>

namespace wmaudit {
namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_punct(unsigned char c) {
  return c < 0x80 && ((c >= '!' && c <= '/') || (c >= ':' && c <= '@') ||
                      (c >= '[' && c <= '`') || (c >= '{' && c <= '~'));
}

bool attaches_left(std::string_view tok) {
  return tok.size() == 1 && std::string_view(".,;:!?)]}%").find(tok[0]) != std::string_view::npos;
}

bool attaches_right(std::string_view tok) {
  return tok.size() == 1 && std::string_view("([{").find(tok[0]) != std::string_view::npos;
}

}  // namespace

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      out.push_back(std::move(word));
      word.clear();
    }
  };
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_space(c)) {
      flush();
    } else if (is_punct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      word.push_back(ch);
    }
  }
  flush();
  return out;
}

std::string ascii_lower(std::string_view text) {
  std::string out(text);
  for (char& ch : out) {
    if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::string_view unk)
    : tokens_(std::move(tokens)) {
  if (tokens_.empty()) throw std::invalid_argument("vocabulary: no tokens");
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw std::invalid_argument("vocabulary: duplicate token '" + tokens_[i] + "'");
    }
  }
  const auto unk_it = index_.find(std::string(unk));
  if (unk_it == index_.end()) throw std::invalid_argument("vocabulary: UNK token missing");
  unk_id_ = unk_it->second;

  lowercase_map_.resize(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const auto it = index_.find(ascii_lower(tokens_[i]));
    lowercase_map_[i] = it == index_.end() ? static_cast<TokenId>(i) : it->second;
  }
  // UNK maps to itself even if "<unk>" lowercases to something present.
  lowercase_map_[static_cast<std::size_t>(unk_id_)] = unk_id_;
}

Vocabulary Vocabulary::build(std::span<const std::string> corpus) {
  if (corpus.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  std::vector<std::string> tokens;
  std::unordered_map<std::string, bool> seen;
  for (const auto& doc : corpus) {
    for (auto& tok : split_tokens(doc)) {
      if (seen.emplace(tok, true).second) tokens.push_back(std::move(tok));
    }
  }
  const std::size_t n_surface = tokens.size();
  for (std::size_t i = 0; i < n_surface; ++i) {
    std::string lower = ascii_lower(tokens[i]);
    if (seen.emplace(lower, true).second) tokens.push_back(std::move(lower));
  }
  tokens.emplace_back(kUnkToken);
  return Vocabulary(std::move(tokens));
}

TokenId Vocabulary::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? unk_id_ : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.find(std::string(token)) != index_.end();
}

TokenSeq Vocabulary::encode(std::string_view text) const {
  TokenSeq seq;
  seq.source_text = std::string(text);
  for (const auto& tok : split_tokens(text)) seq.ids.push_back(id(tok));
  return seq;
}

std::vector<TokenId> Vocabulary::lowercase(std::span<const TokenId> ids) const {
  std::vector<TokenId> out;
  out.reserve(ids.size());
  for (const TokenId t : ids) out.push_back(lowercase_of(t));
  return out;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  bool glue_next = true;
  for (const TokenId t : ids) {
    const std::string& tok = token(t);
    if (!glue_next && !attaches_left(tok)) out.push_back(' ');
    out += tok;
    glue_next = attaches_right(tok);
  }
  return out;
}

}  // namespace wmaudit
