#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "wmaudit/lm.hpp"
#include "wmaudit/ngram.hpp"
#include "wmaudit/rng.hpp"

namespace wmaudit {

enum class Scheme { umd, unigram };
enum class WatermarkMode { soft, hard };

std::string to_string(Scheme scheme);
std::string to_string(WatermarkMode mode);
Scheme parse_scheme(std::string_view text);
WatermarkMode parse_mode(std::string_view text);

/// Logit assigned to red tokens under a hard watermark. exp() of it minus
/// any finite maximum is exactly 0.0 in double precision.
inline constexpr double kHardMaskLogit = -1.0e300;

struct WatermarkConfig {
  Scheme scheme = Scheme::umd;
  double gamma = 0.5;
  double delta = 10.0;
  std::uint64_t key = 0;
  WatermarkMode mode = WatermarkMode::soft;

  /// Throws std::invalid_argument unless gamma is in (0,1), delta >= 0 and
  /// both lists are non-empty for this vocabulary size.
  void validate(std::size_t vocab_size) const;

  /// {"scheme","gamma","delta","key","mode"}; the key is a 0x-prefixed hex string.
  std::string to_json() const;
  static WatermarkConfig from_json(const std::string& text);

  friend bool operator==(const WatermarkConfig&, const WatermarkConfig&) = default;
};

std::string key_to_hex(std::uint64_t key);
std::uint64_t key_from_hex(std::string_view text);

/// floor(gamma * V).
std::size_t green_count(std::size_t vocab_size, double gamma);

class GreenMask {
 public:
  GreenMask() = default;
  explicit GreenMask(std::size_t vocab_size) : size_(vocab_size), words_((vocab_size + 63) / 64) {}

  std::size_t size() const noexcept { return size_; }
  bool is_green(TokenId token) const noexcept {
    const auto t = static_cast<std::size_t>(token);
    return (words_[t >> 6] >> (t & 63)) & 1U;
  }
  void set_green(TokenId token) noexcept {
    const auto t = static_cast<std::size_t>(token);
    words_[t >> 6] |= std::uint64_t{1} << (t & 63);
  }
  std::size_t popcount() const noexcept;

  friend bool operator==(const GreenMask&, const GreenMask&) = default;

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Seeded Fisher-Yates permutation of 0..V-1 driven by SplitMix64(seed)
/// (j = below(i + 1) for i = V-1 down to 1); the first floor(gamma * V)
/// entries are green.
GreenMask partition_unigram(std::size_t vocab_size, double gamma, std::uint64_t key);

using SeedMixer = std::uint64_t (*)(std::uint64_t);

/// As partition_unigram with seed mixer(key ^ prev_token_id). prev_token_id
/// may equal V, the sentinel used for the first generated token.
GreenMask partition_umd(TokenId prev_token_id, std::size_t vocab_size, double gamma,
                        std::uint64_t key, SeedMixer mixer = &mix64);

/// Id used in place of the previous token when the context is empty.
inline TokenId umd_sentinel(std::size_t vocab_size) { return static_cast<TokenId>(vocab_size); }

NextTokenLogits apply_soft_bias(NextTokenLogits logits, const GreenMask& mask, double delta);
NextTokenLogits apply_hard_mask(NextTokenLogits logits, const GreenMask& mask);

/// Every mask a configuration can produce, computed once: one mask for
/// Unigram, V + 1 masks (one per previous token plus the sentinel) for UMD.
class MaskTable {
 public:
  MaskTable(const WatermarkConfig& config, std::size_t vocab_size);

  const GreenMask& mask_for(std::span<const TokenId> context) const;
  const GreenMask& mask_after(TokenId prev) const;
  std::size_t vocab_size() const noexcept { return vocab_size_; }

 private:
  Scheme scheme_;
  std::size_t vocab_size_;
  std::vector<GreenMask> masks_;
};

/// An n-gram model with a green/red watermark applied at decode time.
class WatermarkedModel final : public LanguageModel {
 public:
  WatermarkedModel(std::shared_ptr<const NGramModel> base, const WatermarkConfig& config);

  const Vocabulary& vocabulary() const override { return base_->vocabulary(); }
  const NGramModel& base() const noexcept { return *base_; }
  std::shared_ptr<const NGramModel> base_ptr() const noexcept { return base_; }
  const WatermarkConfig& config() const noexcept { return config_; }
  const MaskTable& masks() const noexcept { return *masks_; }

  NextTokenLogits next_token_logits(std::span<const TokenId> context) const override;

  /// Sparse path: with G the unwatermarked green mass of the context,
  ///   soft: ln p(t) + delta * [t green] - ln(1 + (e^delta - 1) * G)
  ///   hard: ln p(t) - ln G for green t, -inf for red t.
  double token_logprob(std::span<const TokenId> context, TokenId token) const override;

  /// Unwatermarked probability mass on the green list of this context.
  double green_mass(std::span<const TokenId> context) const;

 private:
  std::shared_ptr<const NGramModel> base_;
  WatermarkConfig config_;
  std::shared_ptr<const MaskTable> masks_;
};

/// Mask selection plus soft/hard transform over the full logit vector.
NextTokenLogits watermarked_next_token_logits(const NGramModel& model,
                                              std::span<const TokenId> context,
                                              const WatermarkConfig& config);

/// Detector z-score z = (g - gamma T) / sqrt(T gamma (1 - gamma)) over
/// tokens[prompt_len..]; UMD masks come from each token's predecessor.
double green_fraction_zscore(std::span<const TokenId> tokens, const WatermarkConfig& config,
                             std::size_t vocab_size, std::size_t prompt_len = 0);

}  // namespace wmaudit
