#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "wmaudit/corpus.hpp"
#include "wmaudit/rng.hpp"

namespace wmaudit {

/// A small synthetic language used to build desk-scale member/nonmember
/// datasets: a seeded lexicon of pseudo-words (some always capitalized),
/// a sparse first-order successor structure, sentence-initial
/// capitalization, commas and full stops.
class SyntheticLanguage {
 public:
  struct Options {
    std::size_t lexicon_size = 400;
    std::size_t successors = 6;     // preferred successors per word
    double follow_prob = 0.75;      // chance of taking a preferred successor
    double zipf_exponent = 1.0;
    double proper_noun_rate = 0.08;
    double comma_rate = 0.06;
    std::size_t min_sentence = 6;
    std::size_t max_sentence = 14;
  };

  SyntheticLanguage(std::uint64_t seed, const Options& options);

  /// A document of exactly `n_words` words (punctuation not counted).
  std::string document(std::size_t n_words, SplitMix64& rng) const;

  const std::vector<std::string>& lexicon() const noexcept { return words_; }

 private:
  std::size_t draw_zipf(SplitMix64& rng) const;

  Options options_;
  std::vector<std::string> words_;
  std::vector<bool> proper_;
  std::vector<double> zipf_cdf_;
  std::vector<std::vector<std::size_t>> successors_;
};

struct DatasetSplit {
  std::string name;
  std::size_t words = 0;
  std::vector<LabeledText> rows;  // members first, then nonmembers
};

struct FixtureOptions {
  std::uint64_t seed = 20240917;
  std::size_t per_side = 200;
  std::vector<std::size_t> split_words{32, 64, 128, 256};
  std::size_t target_words = 512;
  // Extra training-only documents so members are not the whole corpus.
  std::size_t background_docs = 2000;
  std::size_t background_words = 100;
  SyntheticLanguage::Options language{};
};

/// Training corpus = [target document, members of every split, background
/// documents]; the target sits at index 0 so it can be duplicated.
/// Nonmembers are drawn from the same language and never enter the corpus.
struct Fixture {
  std::vector<std::string> training_corpus;
  std::size_t target_index = 0;
  std::vector<DatasetSplit> splits;
  /// Every text in the fixture, for vocabulary construction.
  std::vector<std::string> all_texts() const;
};

Fixture make_fixture(const FixtureOptions& options);

}  // namespace wmaudit
