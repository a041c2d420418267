#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "wmaudit/vocab.hpp"

namespace wmaudit {

/// Length-V vector of natural-log-scale logits.
struct NextTokenLogits {
  std::vector<double> logits;
};

/// Read-only next-token model. Implementations are immutable after
/// construction and safe to share across threads.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual const Vocabulary& vocabulary() const = 0;
  std::size_t vocab_size() const { return vocabulary().size(); }

  /// Full logit vector for the next token given the whole preceding text.
  virtual NextTokenLogits next_token_logits(std::span<const TokenId> context) const = 0;

  /// ln P(token | context). The default goes through next_token_logits;
  /// models override it with a sparse fast path.
  virtual double token_logprob(std::span<const TokenId> context, TokenId token) const;
};

/// Numerically stable softmax / log-softmax.
std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);

/// ln P(t_i | t_1..t_{i-1}) for i = prompt_len .. len-1 (0-based).
std::vector<double> token_logprobs(const LanguageModel& model, std::span<const TokenId> tokens,
                                   std::size_t prompt_len);

/// Sum of the scored token log-probabilities. Throws std::invalid_argument
/// when prompt_len >= tokens.size().
double sequence_logprob(const LanguageModel& model, std::span<const TokenId> tokens,
                        std::size_t prompt_len);

/// exp(-sequence_logprob / n) with n = len - prompt_len >= 1.
double perplexity(const LanguageModel& model, std::span<const TokenId> tokens,
                  std::size_t prompt_len);

/// Perplexity from already-computed per-token log-probabilities.
double perplexity_from_logprobs(std::span<const double> logprobs);

enum class DecodeMode { greedy, multinomial };

/// Appends `max_len` tokens to `prompt`; returns only the new tokens.
/// Greedy ties resolve to the lowest token id. Multinomial draws use a
/// SplitMix64 stream seeded with `rng_seed`.
std::vector<TokenId> generate(const LanguageModel& model, std::span<const TokenId> prompt,
                              std::size_t max_len, DecodeMode mode, std::uint64_t rng_seed);

/// Inverse-CDF draw from a probability vector using a uniform in [0,1).
TokenId sample_from(std::span<const double> probs, double u);

}  // namespace wmaudit
