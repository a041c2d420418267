#include "wmaudit/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace wmaudit {
namespace {

constexpr const char* kOnsets[] = {"b", "d", "f", "g", "h", "k", "l", "m", "n", "p",
                                   "r", "s", "t", "v", "z", "br", "st", "tr", "ch", "sh"};
constexpr const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou", "ea"};
constexpr const char* kCodas[] = {"", "", "", "n", "r", "s", "l", "m", "t"};

template <std::size_t N>
const char* pick(const char* const (&arr)[N], SplitMix64& rng) {
  return arr[rng.below(N)];
}

std::string capitalize(std::string w) {
  if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

}  // namespace

SyntheticLanguage::SyntheticLanguage(std::uint64_t seed, const Options& options)
    : options_(options) {
  if (options_.lexicon_size < 8) throw std::invalid_argument("synthetic language: lexicon too small");
  if (options_.min_sentence < 1 || options_.max_sentence < options_.min_sentence) {
    throw std::invalid_argument("synthetic language: bad sentence length range");
  }
  SplitMix64 rng(derive_seed(seed, "lexicon", 0));
  std::unordered_set<std::string> seen;
  while (words_.size() < options_.lexicon_size) {
    const std::size_t syllables = 1 + rng.below(3);
    std::string w;
    for (std::size_t s = 0; s < syllables; ++s) {
      w += pick(kOnsets, rng);
      w += pick(kVowels, rng);
    }
    w += pick(kCodas, rng);
    if (seen.insert(w).second) words_.push_back(std::move(w));
  }
  proper_.resize(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    proper_[i] = rng.uniform01() < options_.proper_noun_rate;
  }

  double acc = 0.0;
  for (std::size_t r = 0; r < words_.size(); ++r) {
    acc += 1.0 / std::pow(static_cast<double>(r + 1), options_.zipf_exponent);
    zipf_cdf_.push_back(acc);
  }
  for (double& c : zipf_cdf_) c /= acc;

  SplitMix64 succ_rng(derive_seed(seed, "successors", 0));
  successors_.resize(words_.size());
  for (auto& list : successors_) {
    while (list.size() < options_.successors) list.push_back(draw_zipf(succ_rng));
  }
}

std::size_t SyntheticLanguage::draw_zipf(SplitMix64& rng) const {
  const double u = rng.uniform01();
  const auto it = std::upper_bound(zipf_cdf_.begin(), zipf_cdf_.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - zipf_cdf_.begin()), words_.size() - 1);
}

std::string SyntheticLanguage::document(std::size_t n_words, SplitMix64& rng) const {
  std::string out;
  std::size_t prev = draw_zipf(rng);
  std::size_t left_in_sentence = 0;
  for (std::size_t i = 0; i < n_words; ++i) {
    const bool sentence_start = left_in_sentence == 0;
    if (sentence_start) {
      left_in_sentence = options_.min_sentence +
                         rng.below(options_.max_sentence - options_.min_sentence + 1);
    }
    std::size_t w;
    if (rng.uniform01() < options_.follow_prob) {
      // Preferred successors are themselves rank-weighted: 1/(r+1).
      const auto& list = successors_[prev];
      double total = 0.0;
      for (std::size_t r = 0; r < list.size(); ++r) total += 1.0 / static_cast<double>(r + 1);
      double u = rng.uniform01() * total;
      std::size_t r = 0;
      while (r + 1 < list.size() && u >= 1.0 / static_cast<double>(r + 1)) {
        u -= 1.0 / static_cast<double>(r + 1);
        ++r;
      }
      w = list[r];
    } else {
      w = draw_zipf(rng);
    }
    std::string surface = words_[w];
    if (sentence_start || proper_[w]) surface = capitalize(std::move(surface));
    if (!out.empty()) out.push_back(' ');
    out += surface;
    --left_in_sentence;
    if (left_in_sentence == 0 || i + 1 == n_words) {
      out.push_back('.');
      left_in_sentence = 0;
    } else if (rng.uniform01() < options_.comma_rate) {
      out.push_back(',');
    }
    prev = w;
  }
  return out;
}

std::vector<std::string> Fixture::all_texts() const {
  std::vector<std::string> out = training_corpus;
  for (const auto& split : splits) {
    for (const auto& row : split.rows) {
      if (row.label == Label::nonmember) out.push_back(row.text);
    }
  }
  return out;
}

Fixture make_fixture(const FixtureOptions& options) {
  if (options.per_side == 0) throw std::invalid_argument("fixture: per_side must be >= 1");
  const SyntheticLanguage lang(options.seed, options.language);
  Fixture fx;
  SplitMix64 target_rng(derive_seed(options.seed, "target", 0));
  fx.training_corpus.push_back(lang.document(options.target_words, target_rng));
  fx.target_index = 0;
  for (std::size_t s = 0; s < options.split_words.size(); ++s) {
    DatasetSplit split;
    split.words = options.split_words[s];
    split.name = "split" + std::to_string(split.words);
    for (std::size_t i = 0; i < 2 * options.per_side; ++i) {
      SplitMix64 rng(derive_seed(options.seed, "doc-" + split.name, i));
      const Label label = i < options.per_side ? Label::member : Label::nonmember;
      split.rows.push_back({lang.document(split.words, rng), label});
      if (label == Label::member) fx.training_corpus.push_back(split.rows.back().text);
    }
    fx.splits.push_back(std::move(split));
  }
  for (std::size_t i = 0; i < options.background_docs; ++i) {
    SplitMix64 rng(derive_seed(options.seed, "background", i));
    fx.training_corpus.push_back(lang.document(options.background_words, rng));
  }
  return fx;
}

}  // namespace wmaudit
