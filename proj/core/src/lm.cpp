#include "wmaudit/lm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "wmaudit/rng.hpp"

namespace wmaudit {

double LanguageModel::token_logprob(std::span<const TokenId> context, TokenId token) const {
  const auto logits = next_token_logits(context);
  return log_softmax(logits.logits).at(static_cast<std::size_t>(token));
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (const double z : logits) sum += std::exp(z - mx);
  const double lse = mx + std::log(sum);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

std::vector<double> token_logprobs(const LanguageModel& model, std::span<const TokenId> tokens,
                                   std::size_t prompt_len) {
  if (prompt_len >= tokens.size()) {
    throw std::invalid_argument("prompt_len must be smaller than the sequence length");
  }
  std::vector<double> out;
  out.reserve(tokens.size() - prompt_len);
  for (std::size_t i = prompt_len; i < tokens.size(); ++i) {
    out.push_back(model.token_logprob(tokens.first(i), tokens[i]));
  }
  return out;
}

double sequence_logprob(const LanguageModel& model, std::span<const TokenId> tokens,
                        std::size_t prompt_len) {
  double sum = 0.0;
  for (const double lp : token_logprobs(model, tokens, prompt_len)) sum += lp;
  return sum;
}

double perplexity_from_logprobs(std::span<const double> logprobs) {
  if (logprobs.empty()) throw std::invalid_argument("perplexity: no scored tokens");
  double sum = 0.0;
  for (const double lp : logprobs) sum += lp;
  return std::exp(-sum / static_cast<double>(logprobs.size()));
}

double perplexity(const LanguageModel& model, std::span<const TokenId> tokens,
                  std::size_t prompt_len) {
  return perplexity_from_logprobs(token_logprobs(model, tokens, prompt_len));
}

TokenId sample_from(std::span<const double> probs, double u) {
  double acc = 0.0;
  TokenId last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = static_cast<TokenId>(i);
    if (u < acc) return last_positive;
  }
  // u landed in the rounding gap above the accumulated mass.
  return last_positive;
}

std::vector<TokenId> generate(const LanguageModel& model, std::span<const TokenId> prompt,
                              std::size_t max_len, DecodeMode mode, std::uint64_t rng_seed) {
  if (max_len == 0) throw std::invalid_argument("generate: max_len must be >= 1");
  SplitMix64 rng(rng_seed);
  std::vector<TokenId> text(prompt.begin(), prompt.end());
  text.reserve(prompt.size() + max_len);
  for (std::size_t step = 0; step < max_len; ++step) {
    const auto logits = model.next_token_logits(text);
    TokenId next = 0;
    if (mode == DecodeMode::greedy) {
      const auto it = std::max_element(logits.logits.begin(), logits.logits.end());
      next = static_cast<TokenId>(it - logits.logits.begin());
    } else {
      const auto probs = softmax(logits.logits);
      next = sample_from(probs, rng.uniform01());
    }
    text.push_back(next);
  }
  return {text.begin() + static_cast<std::ptrdiff_t>(prompt.size()), text.end()};
}

}  // namespace wmaudit
