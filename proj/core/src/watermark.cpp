#include "wmaudit/watermark.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace wmaudit {

std::string to_string(Scheme scheme) { return scheme == Scheme::umd ? "umd" : "unigram"; }
std::string to_string(WatermarkMode mode) { return mode == WatermarkMode::soft ? "soft" : "hard"; }

Scheme parse_scheme(std::string_view text) {
  const std::string s = ascii_lower(text);
  if (s == "umd") return Scheme::umd;
  if (s == "unigram") return Scheme::unigram;
  throw std::invalid_argument("unknown watermark scheme '" + std::string(text) + "'");
}

WatermarkMode parse_mode(std::string_view text) {
  const std::string s = ascii_lower(text);
  if (s == "soft") return WatermarkMode::soft;
  if (s == "hard") return WatermarkMode::hard;
  throw std::invalid_argument("unknown watermark mode '" + std::string(text) + "'");
}

std::size_t green_count(std::size_t vocab_size, double gamma) {
  return static_cast<std::size_t>(std::floor(gamma * static_cast<double>(vocab_size)));
}

void WatermarkConfig::validate(std::size_t vocab_size) const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("watermark: gamma must be in (0,1)");
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw std::invalid_argument("watermark: delta must be finite and >= 0");
  }
  const std::size_t g = green_count(vocab_size, gamma);
  if (g < 1 || g + 1 > vocab_size) {
    throw std::invalid_argument("watermark: floor(gamma*V) must be in [1, V-1]");
  }
}

std::string key_to_hex(std::uint64_t key) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(key));
  return buf;
}

std::uint64_t key_from_hex(std::string_view text) {
  std::string s(text);
  std::size_t pos = 0;
  const auto value = std::stoull(s, &pos, 16);
  if (pos != s.size()) throw std::invalid_argument("bad hex key '" + s + "'");
  return value;
}

std::string WatermarkConfig::to_json() const {
  const nlohmann::json j = {{"scheme", to_string(scheme)},
                            {"gamma", gamma},
                            {"delta", delta},
                            {"key", key_to_hex(key)},
                            {"mode", to_string(mode)}};
  return j.dump();
}

WatermarkConfig WatermarkConfig::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  WatermarkConfig c;
  c.scheme = parse_scheme(j.at("scheme").get<std::string>());
  c.gamma = j.at("gamma").get<double>();
  c.delta = j.value("delta", 0.0);
  const auto& key = j.at("key");
  c.key = key.is_string() ? key_from_hex(key.get<std::string>()) : key.get<std::uint64_t>();
  c.mode = parse_mode(j.value("mode", std::string("soft")));
  return c;
}

std::size_t GreenMask::popcount() const noexcept {
  std::size_t n = 0;
  for (const auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

namespace {

GreenMask partition_from_seed(std::size_t vocab_size, double gamma, std::uint64_t seed) {
  if (vocab_size < 2) throw std::invalid_argument("partition: V must be >= 2");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("partition: gamma must be in (0,1)");
  std::vector<TokenId> perm(vocab_size);
  std::iota(perm.begin(), perm.end(), TokenId{0});
  SplitMix64 rng(seed);
  for (std::size_t i = vocab_size - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(perm[i], perm[j]);
  }
  GreenMask mask(vocab_size);
  const std::size_t g = green_count(vocab_size, gamma);
  for (std::size_t i = 0; i < g; ++i) mask.set_green(perm[i]);
  return mask;
}

}  // namespace

GreenMask partition_unigram(std::size_t vocab_size, double gamma, std::uint64_t key) {
  return partition_from_seed(vocab_size, gamma, key);
}

GreenMask partition_umd(TokenId prev_token_id, std::size_t vocab_size, double gamma,
                        std::uint64_t key, SeedMixer mixer) {
  if (prev_token_id < 0 || static_cast<std::size_t>(prev_token_id) > vocab_size) {
    throw std::out_of_range("partition_umd: previous token id outside [0, V]");
  }
  return partition_from_seed(vocab_size, gamma,
                             mixer(key ^ static_cast<std::uint64_t>(prev_token_id)));
}

NextTokenLogits apply_soft_bias(NextTokenLogits logits, const GreenMask& mask, double delta) {
  if (!(delta >= 0.0)) throw std::invalid_argument("apply_soft_bias: delta must be >= 0");
  if (logits.logits.size() != mask.size()) throw std::invalid_argument("apply_soft_bias: size mismatch");
  for (std::size_t i = 0; i < logits.logits.size(); ++i) {
    if (mask.is_green(static_cast<TokenId>(i))) logits.logits[i] += delta;
  }
  return logits;
}

NextTokenLogits apply_hard_mask(NextTokenLogits logits, const GreenMask& mask) {
  if (logits.logits.size() != mask.size()) throw std::invalid_argument("apply_hard_mask: size mismatch");
  for (std::size_t i = 0; i < logits.logits.size(); ++i) {
    if (!mask.is_green(static_cast<TokenId>(i))) logits.logits[i] = kHardMaskLogit;
  }
  return logits;
}

MaskTable::MaskTable(const WatermarkConfig& config, std::size_t vocab_size)
    : scheme_(config.scheme), vocab_size_(vocab_size) {
  config.validate(vocab_size);
  if (scheme_ == Scheme::unigram) {
    masks_.push_back(partition_unigram(vocab_size, config.gamma, config.key));
  } else {
    masks_.reserve(vocab_size + 1);
    for (std::size_t prev = 0; prev <= vocab_size; ++prev) {
      masks_.push_back(
          partition_umd(static_cast<TokenId>(prev), vocab_size, config.gamma, config.key));
    }
  }
}

const GreenMask& MaskTable::mask_after(TokenId prev) const {
  if (scheme_ == Scheme::unigram) return masks_.front();
  return masks_.at(static_cast<std::size_t>(prev));
}

const GreenMask& MaskTable::mask_for(std::span<const TokenId> context) const {
  return mask_after(context.empty() ? umd_sentinel(vocab_size_) : context.back());
}

WatermarkedModel::WatermarkedModel(std::shared_ptr<const NGramModel> base,
                                   const WatermarkConfig& config)
    : base_(std::move(base)), config_(config) {
  if (!base_) throw std::invalid_argument("watermarked model: null base model");
  masks_ = std::make_shared<const MaskTable>(config_, base_->vocab_size());
}

NextTokenLogits WatermarkedModel::next_token_logits(std::span<const TokenId> context) const {
  auto logits = base_->next_token_logits(context);
  const auto& mask = masks_->mask_for(context);
  if (config_.mode == WatermarkMode::hard) return apply_hard_mask(std::move(logits), mask);
  return apply_soft_bias(std::move(logits), mask, config_.delta);
}

double WatermarkedModel::green_mass(std::span<const TokenId> context) const {
  const auto dist = base_->distribution(context);
  const auto& mask = masks_->mask_for(context);
  double green_counts = 0.0;
  for (const auto& [tok, c] : dist.successors()) {
    if (mask.is_green(tok)) green_counts += static_cast<double>(c);
  }
  const double n_green = static_cast<double>(green_count(dist.vocab_size(), config_.gamma));
  return (green_counts + dist.alpha() * n_green) / dist.denominator();
}

double WatermarkedModel::token_logprob(std::span<const TokenId> context, TokenId token) const {
  const auto dist = base_->distribution(context);
  const auto& mask = masks_->mask_for(context);
  const bool green = mask.is_green(token);
  const double lp = dist.logprob(token);
  const double g = green_mass(context);
  if (config_.mode == WatermarkMode::hard) {
    return green ? lp - std::log(g) : -std::numeric_limits<double>::infinity();
  }
  return lp + (green ? config_.delta : 0.0) - std::log1p(std::expm1(config_.delta) * g);
}

NextTokenLogits watermarked_next_token_logits(const NGramModel& model,
                                              std::span<const TokenId> context,
                                              const WatermarkConfig& config) {
  const std::size_t V = model.vocab_size();
  config.validate(V);
  GreenMask mask = config.scheme == Scheme::unigram
                       ? partition_unigram(V, config.gamma, config.key)
                       : partition_umd(context.empty() ? umd_sentinel(V) : context.back(), V,
                                       config.gamma, config.key);
  auto logits = model.next_token_logits(context);
  if (config.mode == WatermarkMode::hard) return apply_hard_mask(std::move(logits), mask);
  return apply_soft_bias(std::move(logits), mask, config.delta);
}

double green_fraction_zscore(std::span<const TokenId> tokens, const WatermarkConfig& config,
                             std::size_t vocab_size, std::size_t prompt_len) {
  if (prompt_len >= tokens.size()) throw std::invalid_argument("zscore: no scored tokens");
  config.validate(vocab_size);
  std::map<TokenId, GreenMask> cache;
  auto mask_after = [&](TokenId prev) -> const GreenMask& {
    if (config.scheme == Scheme::unigram) prev = 0;
    auto it = cache.find(prev);
    if (it == cache.end()) {
      it = cache
               .emplace(prev, config.scheme == Scheme::unigram
                                  ? partition_unigram(vocab_size, config.gamma, config.key)
                                  : partition_umd(prev, vocab_size, config.gamma, config.key))
               .first;
    }
    return it->second;
  };
  std::size_t green = 0;
  for (std::size_t i = prompt_len; i < tokens.size(); ++i) {
    const TokenId prev = i == 0 ? umd_sentinel(vocab_size) : tokens[i - 1];
    if (mask_after(prev).is_green(tokens[i])) ++green;
  }
  const double T = static_cast<double>(tokens.size() - prompt_len);
  const double g = config.gamma;
  return (static_cast<double>(green) - g * T) / std::sqrt(T * g * (1.0 - g));
}

}  // namespace wmaudit
