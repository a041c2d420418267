#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "wmaudit/lm.hpp"
#include "wmaudit/vocab.hpp"

namespace wmaudit {

/// Count one training document `factor` times.
struct Duplication {
  std::size_t doc_index = 0;
  std::uint64_t factor = 1;
};

/// Successor counts of one context.
struct ContextCounts {
  std::uint64_t total = 0;
  std::vector<std::pair<TokenId, std::uint64_t>> next;  // sorted by token id

  std::uint64_t count(TokenId token) const noexcept;
};

/// The smoothed next-token distribution at one backoff level:
/// P(t) = (count(t) + alpha) / (total + alpha * V).
class ContextDistribution {
 public:
  ContextDistribution(const ContextCounts* counts, double alpha, std::size_t vocab_size) noexcept;

  double prob(TokenId token) const noexcept;
  double logprob(TokenId token) const noexcept;
  double denominator() const noexcept { return denom_; }
  double alpha() const noexcept { return alpha_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  /// Observed successors; every other token has count 0. Empty when the
  /// distribution is the untrained uniform one.
  std::span<const std::pair<TokenId, std::uint64_t>> successors() const noexcept;

 private:
  const ContextCounts* counts_;
  double alpha_;
  std::size_t vocab_size_;
  double denom_;
};

/// Additively smoothed n-gram model with stupid-simple backoff: the longest
/// suffix of the history (up to `order` tokens) that was seen in training
/// supplies the whole distribution. `order` is the context length, so
/// order 1 is a bigram model and order 0 a unigram model.
class NGramModel final : public LanguageModel {
 public:
  /// Trains on tokenized documents. Each document contributes, at every
  /// position i, one count to each context suffix of length 0..min(i, order).
  static NGramModel train(std::shared_ptr<const Vocabulary> vocab,
                          std::span<const std::vector<TokenId>> docs, int order, double alpha,
                          std::optional<Duplication> duplication = std::nullopt);

  /// An untrained model: uniform 1/V everywhere.
  NGramModel(std::shared_ptr<const Vocabulary> vocab, int order, double alpha);

  const Vocabulary& vocabulary() const override { return *vocab_; }
  std::shared_ptr<const Vocabulary> vocabulary_ptr() const noexcept { return vocab_; }
  int order() const noexcept { return order_; }
  double alpha() const noexcept { return alpha_; }
  std::size_t num_contexts() const noexcept { return table_.size(); }

  /// Distribution after backoff for the given history.
  ContextDistribution distribution(std::span<const TokenId> context) const;
  double prob(std::span<const TokenId> context, TokenId token) const;

  NextTokenLogits next_token_logits(std::span<const TokenId> context) const override;
  double token_logprob(std::span<const TokenId> context, TokenId token) const override;

  /// JSON dump {"format", "order", "alpha", "vocab", "counts"}; contexts are
  /// emitted in lexicographic order so the output is byte-stable.
  std::string to_json() const;
  static NGramModel from_json(const std::string& text);

 private:
  struct KeyHash {
    std::size_t operator()(const std::vector<TokenId>& key) const noexcept;
  };
  using Table = std::unordered_map<std::vector<TokenId>, ContextCounts, KeyHash>;

  NGramModel(std::shared_ptr<const Vocabulary> vocab, int order, double alpha, Table table);
  const ContextCounts* lookup(std::span<const TokenId> context) const;

  std::shared_ptr<const Vocabulary> vocab_;
  int order_;
  double alpha_;
  Table table_;
};

/// Tokenizes `corpus` with `vocab` and trains. Throws std::out_of_range
/// when the duplication index does not name a document.
NGramModel train_ngram(std::shared_ptr<const Vocabulary> vocab,
                       std::span<const std::string> corpus, int order, double alpha,
                       std::optional<Duplication> duplication = std::nullopt);

}  // namespace wmaudit
