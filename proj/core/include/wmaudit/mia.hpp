#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wmaudit/lm.hpp"
#include "wmaudit/ngram.hpp"
#include "wmaudit/watermark.hpp"

namespace wmaudit {

// All attack scores are oriented so that higher means "more likely a
// training member"; perplexity-style statistics are negated accordingly.

enum class Label { nonmember = 0, member = 1 };

struct LabeledSample {
  TokenSeq tokens;
  Label label = Label::nonmember;
};

enum class Attack { ppl, smaller_ref, lowercase, zlib, min_k, adaptive_min_k };

std::string to_string(Attack attack);
Attack parse_attack(std::string_view name);

struct AttackScore {
  Attack attack = Attack::ppl;
  double score = 0.0;
  std::size_t sample = 0;
  bool flagged = false;  // non-finite statistic (zero probability or zero reference log-ppl)
};

/// DEFLATE level used by the Zlib attack; zlib's default.
inline constexpr int kZlibLevel = 6;

/// 8 * size of the zlib-format (RFC 1950) stream produced by compress2 at
/// kZlibLevel.
std::size_t zlib_compressed_bits(std::string_view text);

/// score = -ln ppl = mean token log-probability (empty prompt).
AttackScore score_ppl(const LanguageModel& model, const TokenSeq& sample);

/// score = -(ln ppl_target / ln ppl_reference).
AttackScore score_smaller_ref(const LanguageModel& target, const LanguageModel& reference,
                              const TokenSeq& sample);

/// score = -(ln ppl(sample) / ln ppl(lowercased sample)).
AttackScore score_lowercase(const LanguageModel& model, const TokenSeq& sample);

/// score = -(ln ppl / zlib_compressed_bits(text)). Uses the sample's
/// source text, or the decoded tokens when it has none.
AttackScore score_zlib(const LanguageModel& model, const TokenSeq& sample);

/// Aggregation space for Min-K%. `log_prob` (the default) averages the k
/// smallest log-probabilities; `prob` averages the probabilities and
/// returns the log of that mean so the orientation is unchanged.
enum class MinKSpace { log_prob, prob };

/// k = floor(n * K / 100); throws std::invalid_argument if K is outside
/// (0, 100] or k == 0.
std::size_t min_k_count(std::size_t n_tokens, double k_percent);

/// Mean of the k smallest values of `logprobs`. For k < n the selected
/// values are summed in ascending order; for k == n in sequence order, so
/// K = 100 reproduces score_ppl bit for bit.
double min_k_from_logprobs(std::span<const double> logprobs, double k_percent,
                           MinKSpace space = MinKSpace::log_prob);

AttackScore score_min_k(const LanguageModel& model, const TokenSeq& sample, double k_percent,
                        MinKSpace space = MinKSpace::log_prob);

/// Per-token log-probabilities of the watermarked model with delta removed
/// from green tokens, using the attacker's copy of the green lists.
std::vector<double> adaptive_logprobs(const LanguageModel& watermarked, const MaskTable& known_masks,
                                      double known_delta, std::span<const TokenId> tokens);

/// Adaptive Min-K%: green-token probabilities are divided by e^delta
/// before taking the Min-K% mean. Throws std::invalid_argument when the
/// attacker's scheme differs from the model's.
AttackScore score_adaptive_min_k(const WatermarkedModel& model, const WatermarkConfig& known,
                                 const TokenSeq& sample, double k_percent);

/// Mann-Whitney AUC: P(member score > nonmember score) + 0.5 P(tie).
/// Throws std::invalid_argument on an empty side or a NaN score.
double auc(std::span<const double> member_scores, std::span<const double> nonmember_scores);

/// AUC of scores paired with labels.
double auc(std::span<const double> scores, std::span<const Label> labels);

inline constexpr std::array<double, 7> kMinKGrid{5, 10, 20, 30, 40, 50, 60};

struct MinKSelection {
  double auc = 0.0;
  double k_percent = 0.0;
  std::vector<double> auc_per_k;  // aligned with the grid
};

/// Evaluates every K in the grid and keeps the highest AUC (first K on ties).
MinKSelection best_min_k(const LanguageModel& model, std::span<const LabeledSample> samples,
                         std::span<const double> grid = kMinKGrid, unsigned threads = 1);

/// Same selection over precomputed per-sample log-probabilities.
MinKSelection best_min_k_from_logprobs(std::span<const std::vector<double>> logprobs,
                                       std::span<const Label> labels,
                                       std::span<const double> grid = kMinKGrid);

struct AucResult {
  Attack attack = Attack::ppl;
  double auc = 0.0;  // mean over keys of the watermarked-model AUC
  double auc_std = 0.0;  // sample standard deviation over keys
  double auc_unwatermarked = 0.0;
  double drop = 0.0;  // auc_unwatermarked - auc
  std::size_t n_members = 0;
  std::size_t n_nonmembers = 0;
  std::vector<double> per_key;
  std::vector<std::uint64_t> keys;
  double k_percent_unwatermarked = 0.0;  // Min-K% attacks only
  std::vector<double> k_percent_per_key;  // Min-K% attacks only
};

/// How the Smaller Ref reference model relates to the watermarked target.
enum class ReferenceVariant { same_watermark, unwatermarked, different_key, different_strength };

std::string to_string(ReferenceVariant variant);
ReferenceVariant parse_reference_variant(std::string_view name);

struct SuiteOptions {
  std::vector<Attack> attacks{Attack::ppl, Attack::smaller_ref, Attack::lowercase, Attack::zlib,
                              Attack::min_k, Attack::adaptive_min_k};
  ReferenceVariant reference = ReferenceVariant::same_watermark;
  double reference_delta_ratio = 0.5;  // different_strength: reference delta = ratio * delta
  std::vector<double> k_grid{kMinKGrid.begin(), kMinKGrid.end()};
  unsigned threads = 1;
};

/// Runs each attack against the unwatermarked target and against the target
/// watermarked with `config` under every key. Without a config the
/// watermarked side equals the unwatermarked one and every drop is 0.
/// For adaptive_min_k the unwatermarked AUC is plain Min-K% on the
/// unwatermarked model.
std::vector<AucResult> attack_suite(std::shared_ptr<const NGramModel> target,
                                    const std::optional<WatermarkConfig>& config,
                                    std::span<const LabeledSample> dataset,
                                    std::shared_ptr<const NGramModel> reference,
                                    std::span<const std::uint64_t> keys,
                                    const SuiteOptions& options = {});

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_stddev(std::span<const double> values);

}  // namespace wmaudit
