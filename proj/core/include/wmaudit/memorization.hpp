#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "wmaudit/lm.hpp"
#include "wmaudit/logspace.hpp"
#include "wmaudit/ngram.hpp"
#include "wmaudit/watermark.hpp"

namespace wmaudit {

// "Relative increase" is ppl_wm / ppl_unwm - 1 throughout. Under that
// reading a sample of n scored tokens becomes (1 + r)^n times less likely.

struct SampleMemorization {
  std::size_t sample = 0;
  std::uint64_t key = 0;
  std::size_t n_scored = 0;
  double ppl_unwm = 0.0;
  double ppl_wm = 0.0;
  double rel_increase = 0.0;
  LogScalar reduction_factor;
  bool infinite = false;  // hard watermark gave the sample probability 0
};

struct KeyMemorization {
  std::uint64_t key = 0;
  double min_rel_increase = 0.0;
  double avg_rel_increase = 0.0;
  std::size_t n_infinite = 0;
};

struct MemorizationReport {
  WatermarkConfig config;  // key field is unused; see per_key
  std::size_t prompt_len = 0;
  std::size_t n_samples = 0;
  std::size_t n_scored_tokens = 0;
  std::vector<SampleMemorization> rows;  // key-major, then sample index
  std::vector<KeyMemorization> per_key;
  double min_rel_increase = 0.0;  // mean over keys of the per-key minimum
  double avg_rel_increase = 0.0;  // mean over keys of the per-key average
  std::size_t n_infinite = 0;
};

/// Scores every sample after its first `prompt_len` tokens under the plain
/// and the watermarked model, once per key. Infinite increases (hard mode,
/// red token in the sample) are counted and left out of min/avg.
MemorizationReport relative_ppl_increase(std::shared_ptr<const NGramModel> model,
                                         const WatermarkConfig& config,
                                         std::span<const std::uint64_t> keys,
                                         std::span<const TokenSeq> samples,
                                         std::size_t prompt_len, unsigned threads = 1);

/// P_unwm(sample | prompt) / P_wm(sample | prompt), held in log space.
LogScalar probability_reduction_factor(std::shared_ptr<const NGramModel> model,
                                       const WatermarkConfig& config, const TokenSeq& sample,
                                       std::size_t prompt_len);

/// (1 + rel_increase)^n in log space.
LogScalar reduction_factor_from_rel_increase(double rel_increase, std::size_t n_tokens);

struct ApproxMemorization {
  std::size_t prefix_len = 0;
  std::vector<TokenId> completion;
  std::vector<TokenId> ground_truth;
  double edit_sim = 0.0;
  double bleu_word = 0.0;
  double bleu_token = 0.0;
};

/// Prompts with the first `prefix_words` tokens (half the sample when it is
/// shorter than 2 * prefix_words), decodes a completion as long as the
/// ground truth (the next prefix_words tokens at most) and scores it.
ApproxMemorization approximate_memorization_eval(std::shared_ptr<const NGramModel> model,
                                                 const std::optional<WatermarkConfig>& config,
                                                 const TokenSeq& sample,
                                                 std::size_t prefix_words = 256,
                                                 DecodeMode mode = DecodeMode::greedy,
                                                 std::uint64_t rng_seed = 0);

/// Mean perplexity, under the unwatermarked model, of `n_samples` texts of
/// `max_len` tokens sampled from the (optionally watermarked) model with an
/// empty prompt. Sample i uses seed derive_seed(rng_seed, "quality", i).
double generation_quality(std::shared_ptr<const NGramModel> model,
                          const std::optional<WatermarkConfig>& config, std::size_t n_samples,
                          std::size_t max_len, std::uint64_t rng_seed, unsigned threads = 1);

}  // namespace wmaudit
