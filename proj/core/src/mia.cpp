#include "wmaudit/mia.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <zlib.h>

#include "wmaudit/parallel.hpp"
#include "wmaudit/rng.hpp"

namespace wmaudit {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double mean_in_order(std::span<const double> xs) {
  double s = 0.0;
  for (const double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Ratio statistics can be inf/inf or x/0 under hard watermarks; such scores
// are flagged and pushed to the non-member end.
AttackScore make_score(Attack attack, double value) {
  AttackScore s;
  s.attack = attack;
  if (std::isnan(value)) {
    s.score = kNegInf;
    s.flagged = true;
  } else {
    s.score = value;
    s.flagged = !std::isfinite(value);
  }
  return s;
}

std::string text_of(const LanguageModel& model, const TokenSeq& sample) {
  return sample.source_text.empty() ? model.vocabulary().decode(sample.ids) : sample.source_text;
}

double log_ppl(std::span<const double> logprobs) { return -mean_in_order(logprobs); }

double ratio_score(double numerator, double denominator) {
  if (denominator == 0.0) return kNegInf;
  return -(numerator / denominator);
}

}  // namespace

std::string to_string(Attack attack) {
  switch (attack) {
    case Attack::ppl: return "ppl";
    case Attack::smaller_ref: return "smaller_ref";
    case Attack::lowercase: return "lowercase";
    case Attack::zlib: return "zlib";
    case Attack::min_k: return "min_k";
    case Attack::adaptive_min_k: return "adaptive_min_k";
  }
  return "unknown";
}

Attack parse_attack(std::string_view name) {
  for (const Attack a : {Attack::ppl, Attack::smaller_ref, Attack::lowercase, Attack::zlib,
                         Attack::min_k, Attack::adaptive_min_k}) {
    if (to_string(a) == name) return a;
  }
  throw std::invalid_argument("unknown attack '" + std::string(name) + "'");
}

std::string to_string(ReferenceVariant variant) {
  switch (variant) {
    case ReferenceVariant::same_watermark: return "same_watermark";
    case ReferenceVariant::unwatermarked: return "unwatermarked";
    case ReferenceVariant::different_key: return "different_key";
    case ReferenceVariant::different_strength: return "different_strength";
  }
  return "unknown";
}

ReferenceVariant parse_reference_variant(std::string_view name) {
  for (const auto v : {ReferenceVariant::same_watermark, ReferenceVariant::unwatermarked,
                       ReferenceVariant::different_key, ReferenceVariant::different_strength}) {
    if (to_string(v) == name) return v;
  }
  throw std::invalid_argument("unknown reference variant '" + std::string(name) + "'");
}

std::size_t zlib_compressed_bits(std::string_view text) {
  uLongf dest_len = compressBound(static_cast<uLong>(text.size()));
  std::vector<Bytef> dest(dest_len);
  const int rc = compress2(dest.data(), &dest_len, reinterpret_cast<const Bytef*>(text.data()),
                           static_cast<uLong>(text.size()), kZlibLevel);
  if (rc != Z_OK) throw std::runtime_error("zlib compress2 failed");
  return 8 * static_cast<std::size_t>(dest_len);
}

AttackScore score_ppl(const LanguageModel& model, const TokenSeq& sample) {
  return make_score(Attack::ppl, mean_in_order(token_logprobs(model, sample.ids, 0)));
}

AttackScore score_smaller_ref(const LanguageModel& target, const LanguageModel& reference,
                              const TokenSeq& sample) {
  const double num = log_ppl(token_logprobs(target, sample.ids, 0));
  const double den = log_ppl(token_logprobs(reference, sample.ids, 0));
  auto s = make_score(Attack::smaller_ref, ratio_score(num, den));
  if (den == 0.0) s.flagged = true;
  return s;
}

AttackScore score_lowercase(const LanguageModel& model, const TokenSeq& sample) {
  const double num = log_ppl(token_logprobs(model, sample.ids, 0));
  const auto lowered = model.vocabulary().lowercase(sample.ids);
  const double den = log_ppl(token_logprobs(model, lowered, 0));
  auto s = make_score(Attack::lowercase, ratio_score(num, den));
  if (den == 0.0) s.flagged = true;
  return s;
}

AttackScore score_zlib(const LanguageModel& model, const TokenSeq& sample) {
  const double num = log_ppl(token_logprobs(model, sample.ids, 0));
  const auto bits = static_cast<double>(zlib_compressed_bits(text_of(model, sample)));
  return make_score(Attack::zlib, ratio_score(num, bits));
}

std::size_t min_k_count(std::size_t n_tokens, double k_percent) {
  if (!(k_percent > 0.0 && k_percent <= 100.0)) {
    throw std::invalid_argument("min_k: K must be in (0, 100]");
  }
  // The epsilon absorbs representation error in products like 30 * 0.1.
  const auto k = static_cast<std::size_t>(
      std::floor(static_cast<double>(n_tokens) * k_percent / 100.0 + 1e-9));
  if (k == 0) throw std::invalid_argument("min_k: floor(n * K%) is 0");
  return std::min(k, n_tokens);
}

double min_k_from_logprobs(std::span<const double> logprobs, double k_percent, MinKSpace space) {
  const std::size_t k = min_k_count(logprobs.size(), k_percent);
  std::vector<double> chosen;
  if (k == logprobs.size()) {
    chosen.assign(logprobs.begin(), logprobs.end());
  } else {
    chosen.assign(logprobs.begin(), logprobs.end());
    std::nth_element(chosen.begin(), chosen.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     chosen.end());
    chosen.resize(k);
    std::sort(chosen.begin(), chosen.end());
  }
  if (space == MinKSpace::log_prob) return mean_in_order(chosen);
  double s = 0.0;
  for (const double lp : chosen) s += std::exp(lp);
  return std::log(s / static_cast<double>(k));
}

AttackScore score_min_k(const LanguageModel& model, const TokenSeq& sample, double k_percent,
                        MinKSpace space) {
  return make_score(Attack::min_k,
                    min_k_from_logprobs(token_logprobs(model, sample.ids, 0), k_percent, space));
}

std::vector<double> adaptive_logprobs(const LanguageModel& watermarked, const MaskTable& known_masks,
                                      double known_delta, std::span<const TokenId> tokens) {
  auto lps = token_logprobs(watermarked, tokens, 0);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (known_masks.mask_for(tokens.first(i)).is_green(tokens[i])) lps[i] -= known_delta;
  }
  return lps;
}

AttackScore score_adaptive_min_k(const WatermarkedModel& model, const WatermarkConfig& known,
                                 const TokenSeq& sample, double k_percent) {
  if (known.scheme != model.config().scheme) {
    throw std::invalid_argument("adaptive min-k: watermark scheme does not match the model");
  }
  std::optional<MaskTable> own;
  const MaskTable* masks = &model.masks();
  if (!(known == model.config())) masks = &own.emplace(known, model.vocab_size());
  return make_score(Attack::adaptive_min_k,
                    min_k_from_logprobs(adaptive_logprobs(model, *masks, known.delta, sample.ids),
                                        k_percent));
}

double auc(std::span<const double> member_scores, std::span<const double> nonmember_scores) {
  if (member_scores.empty() || nonmember_scores.empty()) {
    throw std::invalid_argument("auc: both classes need at least one score");
  }
  struct Entry {
    double score;
    bool member;
  };
  std::vector<Entry> all;
  all.reserve(member_scores.size() + nonmember_scores.size());
  for (const double s : member_scores) all.push_back({s, true});
  for (const double s : nonmember_scores) all.push_back({s, false});
  for (const auto& e : all) {
    if (std::isnan(e.score)) throw std::invalid_argument("auc: NaN score");
  }
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });

  // Sum of member ranks with ties sharing their average rank (1-based).
  // Ranks are doubled to stay in integers.
  std::uint64_t member_rank_x2 = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::uint64_t members_in_group = 0;
    while (j < all.size() && all[j].score == all[i].score) {
      members_in_group += all[j].member ? 1 : 0;
      ++j;
    }
    member_rank_x2 += members_in_group * static_cast<std::uint64_t>(i + 1 + j);
    i = j;
  }
  const auto n_m = static_cast<std::uint64_t>(member_scores.size());
  const auto n_n = static_cast<std::uint64_t>(nonmember_scores.size());
  const std::uint64_t u_x2 = member_rank_x2 - n_m * (n_m + 1);
  return static_cast<double>(u_x2) / (2.0 * static_cast<double>(n_m) * static_cast<double>(n_n));
}

double auc(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: size mismatch");
  std::vector<double> members;
  std::vector<double> nonmembers;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    (labels[i] == Label::member ? members : nonmembers).push_back(scores[i]);
  }
  return auc(members, nonmembers);
}

MinKSelection best_min_k_from_logprobs(std::span<const std::vector<double>> logprobs,
                                       std::span<const Label> labels,
                                       std::span<const double> grid) {
  if (grid.empty()) throw std::invalid_argument("best_min_k: empty K grid");
  MinKSelection best;
  best.auc = -1.0;
  std::vector<double> scores(logprobs.size());
  for (const double k : grid) {
    for (std::size_t i = 0; i < logprobs.size(); ++i) {
      scores[i] = make_score(Attack::min_k, min_k_from_logprobs(logprobs[i], k)).score;
    }
    const double a = auc(scores, labels);
    best.auc_per_k.push_back(a);
    if (a > best.auc) {
      best.auc = a;
      best.k_percent = k;
    }
  }
  return best;
}

MinKSelection best_min_k(const LanguageModel& model, std::span<const LabeledSample> samples,
                         std::span<const double> grid, unsigned threads) {
  std::vector<std::vector<double>> lps(samples.size());
  std::vector<Label> labels(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    lps[i] = token_logprobs(model, samples[i].tokens.ids, 0);
    labels[i] = samples[i].label;
  });
  return best_min_k_from_logprobs(lps, labels, grid);
}

double sample_stddev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean_in_order(values);
  double ss = 0.0;
  for (const double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

namespace {

// Everything one model variant needs to score every attack on a dataset.
struct Profile {
  std::vector<std::vector<double>> target;     // per-token log-probs
  std::vector<std::vector<double>> lowered;    // lowercased sample
  std::vector<std::vector<double>> reference;  // reference model
  std::vector<std::vector<double>> adaptive;   // green tokens minus delta
};

bool needs(const SuiteOptions& o, Attack a) {
  return std::find(o.attacks.begin(), o.attacks.end(), a) != o.attacks.end();
}

Profile profile(const LanguageModel& target, const LanguageModel* reference,
                const MaskTable* known_masks, double known_delta,
                std::span<const LabeledSample> data, const SuiteOptions& o) {
  Profile p;
  const std::size_t n = data.size();
  p.target.resize(n);
  if (needs(o, Attack::lowercase)) p.lowered.resize(n);
  if (reference) p.reference.resize(n);
  if (known_masks) p.adaptive.resize(n);
  parallel_for(n, o.threads, [&](std::size_t i) {
    const auto& ids = data[i].tokens.ids;
    p.target[i] = token_logprobs(target, ids, 0);
    if (!p.lowered.empty()) p.lowered[i] = token_logprobs(target, target.vocabulary().lowercase(ids), 0);
    if (reference) p.reference[i] = token_logprobs(*reference, ids, 0);
    if (known_masks) {
      auto adj = p.target[i];
      for (std::size_t t = 0; t < ids.size(); ++t) {
        if (known_masks->mask_for(std::span<const TokenId>(ids).first(t)).is_green(ids[t])) {
          adj[t] -= known_delta;
        }
      }
      p.adaptive[i] = std::move(adj);
    }
  });
  return p;
}

struct AttackAuc {
  double auc = 0.0;
  double k_percent = 0.0;
};

AttackAuc evaluate(Attack attack, const Profile& p, std::span<const LabeledSample> data,
                   std::span<const Label> labels, std::span<const std::size_t> zbits,
                   const SuiteOptions& o) {
  const std::size_t n = data.size();
  std::vector<double> scores(n);
  switch (attack) {
    case Attack::ppl:
      for (std::size_t i = 0; i < n; ++i) scores[i] = make_score(attack, mean_in_order(p.target[i])).score;
      break;
    case Attack::smaller_ref:
      for (std::size_t i = 0; i < n; ++i) {
        scores[i] = make_score(attack, ratio_score(log_ppl(p.target[i]), log_ppl(p.reference[i]))).score;
      }
      break;
    case Attack::lowercase:
      for (std::size_t i = 0; i < n; ++i) {
        scores[i] = make_score(attack, ratio_score(log_ppl(p.target[i]), log_ppl(p.lowered[i]))).score;
      }
      break;
    case Attack::zlib:
      for (std::size_t i = 0; i < n; ++i) {
        scores[i] = make_score(attack, ratio_score(log_ppl(p.target[i]), static_cast<double>(zbits[i]))).score;
      }
      break;
    case Attack::min_k: {
      const auto sel = best_min_k_from_logprobs(p.target, labels, o.k_grid);
      return {sel.auc, sel.k_percent};
    }
    case Attack::adaptive_min_k: {
      const auto sel = best_min_k_from_logprobs(p.adaptive.empty() ? p.target : p.adaptive, labels, o.k_grid);
      return {sel.auc, sel.k_percent};
    }
  }
  return {auc(scores, labels), 0.0};
}

}  // namespace

std::vector<AucResult> attack_suite(std::shared_ptr<const NGramModel> target,
                                    const std::optional<WatermarkConfig>& config,
                                    std::span<const LabeledSample> dataset,
                                    std::shared_ptr<const NGramModel> reference,
                                    std::span<const std::uint64_t> keys,
                                    const SuiteOptions& options) {
  if (!target) throw std::invalid_argument("attack_suite: null target model");
  if (needs(options, Attack::smaller_ref) && !reference) {
    throw std::invalid_argument("attack_suite: smaller_ref needs a reference model");
  }
  std::vector<Label> labels;
  std::size_t n_members = 0;
  for (const auto& s : dataset) {
    labels.push_back(s.label);
    n_members += s.label == Label::member ? 1 : 0;
  }
  if (n_members == 0 || n_members == dataset.size()) {
    throw std::invalid_argument("attack_suite: dataset needs members and nonmembers");
  }
  std::vector<std::size_t> zbits(dataset.size());
  if (needs(options, Attack::zlib)) {
    parallel_for(dataset.size(), options.threads, [&](std::size_t i) {
      zbits[i] = zlib_compressed_bits(text_of(*target, dataset[i].tokens));
    });
  }
  const bool use_ref = needs(options, Attack::smaller_ref);

  const Profile base = profile(*target, use_ref ? reference.get() : nullptr, nullptr, 0.0,
                               dataset, options);
  std::vector<AucResult> results;
  for (const Attack attack : options.attacks) {
    AucResult r;
    r.attack = attack;
    r.n_members = n_members;
    r.n_nonmembers = dataset.size() - n_members;
    const auto unwm = evaluate(attack == Attack::adaptive_min_k ? Attack::min_k : attack, base,
                               dataset, labels, zbits, options);
    r.auc_unwatermarked = unwm.auc;
    r.k_percent_unwatermarked = unwm.k_percent;
    results.push_back(std::move(r));
  }

  const std::vector<std::uint64_t> key_list =
      !config ? std::vector<std::uint64_t>{}
      : keys.empty() ? std::vector<std::uint64_t>{config->key}
                     : std::vector<std::uint64_t>(keys.begin(), keys.end());

  for (const std::uint64_t key : key_list) {
    WatermarkConfig keyed = *config;
    keyed.key = key;
    const WatermarkedModel wm(target, keyed);

    std::optional<WatermarkedModel> ref_wm;
    const LanguageModel* ref_model = nullptr;
    if (use_ref) {
      WatermarkConfig ref_cfg = keyed;
      switch (options.reference) {
        case ReferenceVariant::same_watermark: break;
        case ReferenceVariant::unwatermarked: ref_model = reference.get(); break;
        case ReferenceVariant::different_key: ref_cfg.key = derive_seed(key, "reference-key", 0); break;
        case ReferenceVariant::different_strength:
          ref_cfg.delta = keyed.delta * options.reference_delta_ratio;
          break;
      }
      if (!ref_model) ref_model = &ref_wm.emplace(reference, ref_cfg);
    }
    const bool adaptive = needs(options, Attack::adaptive_min_k);
    const Profile p = profile(wm, ref_model, adaptive ? &wm.masks() : nullptr, keyed.delta,
                              dataset, options);
    for (auto& r : results) {
      const auto res = evaluate(r.attack, p, dataset, labels, zbits, options);
      r.per_key.push_back(res.auc);
      r.keys.push_back(key);
      if (r.attack == Attack::min_k || r.attack == Attack::adaptive_min_k) {
        r.k_percent_per_key.push_back(res.k_percent);
      }
    }
  }

  for (auto& r : results) {
    if (r.per_key.empty()) {
      r.auc = r.auc_unwatermarked;
      r.auc_std = 0.0;
    } else {
      r.auc = mean_in_order(r.per_key);
      r.auc_std = sample_stddev(r.per_key);
    }
    r.drop = r.auc_unwatermarked - r.auc;
  }
  return results;
}

}  // namespace wmaudit
