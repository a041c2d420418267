#include "wmaudit/memorization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "wmaudit/parallel.hpp"
#include "wmaudit/rng.hpp"
#include "wmaudit/similarity.hpp"

namespace wmaudit {
namespace {

double sum(std::span<const double> xs) {
  double s = 0.0;
  for (const double x : xs) s += x;
  return s;
}

}  // namespace

MemorizationReport relative_ppl_increase(std::shared_ptr<const NGramModel> model,
                                         const WatermarkConfig& config,
                                         std::span<const std::uint64_t> keys,
                                         std::span<const TokenSeq> samples,
                                         std::size_t prompt_len, unsigned threads) {
  if (!model) throw std::invalid_argument("relative_ppl_increase: null model");
  if (samples.empty()) throw std::invalid_argument("relative_ppl_increase: empty sample set");
  for (const auto& s : samples) {
    if (s.size() <= prompt_len) {
      throw std::invalid_argument("relative_ppl_increase: sample not longer than prompt_len");
    }
  }
  const std::vector<std::uint64_t> key_list =
      keys.empty() ? std::vector<std::uint64_t>{config.key}
                   : std::vector<std::uint64_t>(keys.begin(), keys.end());

  MemorizationReport report;
  report.config = config;
  report.prompt_len = prompt_len;
  report.n_samples = samples.size();

  std::vector<double> unwm_logprob(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    unwm_logprob[i] = sequence_logprob(*model, samples[i].ids, prompt_len);
  });
  for (const auto& s : samples) report.n_scored_tokens += s.size() - prompt_len;

  report.rows.resize(key_list.size() * samples.size());
  for (std::size_t k = 0; k < key_list.size(); ++k) {
    WatermarkConfig keyed = config;
    keyed.key = key_list[k];
    const WatermarkedModel wm(model, keyed);
    parallel_for(samples.size(), threads, [&](std::size_t i) {
      const auto n = samples[i].size() - prompt_len;
      const double lp_wm = sequence_logprob(wm, samples[i].ids, prompt_len);
      const double lp_unwm = unwm_logprob[i];
      SampleMemorization row;
      row.sample = i;
      row.key = keyed.key;
      row.n_scored = n;
      row.ppl_unwm = std::exp(-lp_unwm / static_cast<double>(n));
      row.ppl_wm = std::exp(-lp_wm / static_cast<double>(n));
      row.reduction_factor = LogScalar::from_log(lp_unwm - lp_wm);
      row.infinite = std::isinf(lp_wm);
      row.rel_increase = row.infinite ? std::numeric_limits<double>::infinity()
                                      : std::expm1((lp_unwm - lp_wm) / static_cast<double>(n));
      report.rows[k * samples.size() + i] = row;
    });
  }

  double min_acc = 0.0;
  double avg_acc = 0.0;
  for (std::size_t k = 0; k < key_list.size(); ++k) {
    KeyMemorization agg;
    agg.key = key_list[k];
    std::vector<double> finite;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& row = report.rows[k * samples.size() + i];
      if (row.infinite) {
        ++agg.n_infinite;
      } else {
        finite.push_back(row.rel_increase);
      }
    }
    if (finite.empty()) {
      agg.min_rel_increase = agg.avg_rel_increase = std::numeric_limits<double>::quiet_NaN();
    } else {
      agg.min_rel_increase = *std::min_element(finite.begin(), finite.end());
      agg.avg_rel_increase = sum(finite) / static_cast<double>(finite.size());
    }
    report.n_infinite += agg.n_infinite;
    min_acc += agg.min_rel_increase;
    avg_acc += agg.avg_rel_increase;
    report.per_key.push_back(agg);
  }
  report.min_rel_increase = min_acc / static_cast<double>(key_list.size());
  report.avg_rel_increase = avg_acc / static_cast<double>(key_list.size());
  return report;
}

LogScalar probability_reduction_factor(std::shared_ptr<const NGramModel> model,
                                       const WatermarkConfig& config, const TokenSeq& sample,
                                       std::size_t prompt_len) {
  if (!model) throw std::invalid_argument("probability_reduction_factor: null model");
  const WatermarkedModel wm(model, config);
  return LogScalar::from_log(sequence_logprob(*model, sample.ids, prompt_len) -
                             sequence_logprob(wm, sample.ids, prompt_len));
}

LogScalar reduction_factor_from_rel_increase(double rel_increase, std::size_t n_tokens) {
  return LogScalar::from_log(static_cast<double>(n_tokens) * std::log1p(rel_increase));
}

ApproxMemorization approximate_memorization_eval(std::shared_ptr<const NGramModel> model,
                                                 const std::optional<WatermarkConfig>& config,
                                                 const TokenSeq& sample, std::size_t prefix_words,
                                                 DecodeMode mode, std::uint64_t rng_seed) {
  if (!model) throw std::invalid_argument("approximate_memorization_eval: null model");
  if (sample.size() < 2) throw std::invalid_argument("approximate_memorization_eval: sample too short");
  if (prefix_words == 0) throw std::invalid_argument("approximate_memorization_eval: prefix_words must be >= 1");

  ApproxMemorization out;
  out.prefix_len = sample.size() >= 2 * prefix_words ? prefix_words : sample.size() / 2;
  const std::size_t truth_len = std::min(sample.size() - out.prefix_len, prefix_words);
  const auto prefix = sample.view().first(out.prefix_len);
  out.ground_truth.assign(sample.ids.begin() + static_cast<std::ptrdiff_t>(out.prefix_len),
                          sample.ids.begin() + static_cast<std::ptrdiff_t>(out.prefix_len + truth_len));

  if (config) {
    const WatermarkedModel wm(model, *config);
    out.completion = generate(wm, prefix, truth_len, mode, rng_seed);
  } else {
    out.completion = generate(*model, prefix, truth_len, mode, rng_seed);
  }
  const auto& vocab = model->vocabulary();
  out.edit_sim = edit_similarity(out.completion, out.ground_truth);
  out.bleu_word = bleu(out.completion, out.ground_truth, vocab, BleuLevel::word);
  out.bleu_token = bleu(out.completion, out.ground_truth, vocab, BleuLevel::token);
  return out;
}

double generation_quality(std::shared_ptr<const NGramModel> model,
                          const std::optional<WatermarkConfig>& config, std::size_t n_samples,
                          std::size_t max_len, std::uint64_t rng_seed, unsigned threads) {
  if (!model) throw std::invalid_argument("generation_quality: null model");
  if (n_samples == 0) throw std::invalid_argument("generation_quality: n_samples must be >= 1");
  std::optional<WatermarkedModel> wm;
  if (config) wm.emplace(model, *config);
  const LanguageModel& generator = wm ? static_cast<const LanguageModel&>(*wm) : *model;

  std::vector<double> ppl(n_samples);
  parallel_for(n_samples, threads, [&](std::size_t i) {
    const auto text = generate(generator, {}, max_len, DecodeMode::multinomial,
                               derive_seed(rng_seed, "quality", i));
    ppl[i] = perplexity(*model, text, 0);
  });
  return sum(ppl) / static_cast<double>(n_samples);
}

}  // namespace wmaudit
