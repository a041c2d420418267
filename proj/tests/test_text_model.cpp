#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "wmaudit/lm.hpp"
#include "wmaudit/ngram.hpp"
#include "wmaudit/rng.hpp"
#include "wmaudit/vocab.hpp"

using namespace wmtest;

TEST(Vocabulary, FirstOccurrenceThenLowercaseThenUnk) {
  const std::vector<std::string> corpus{"A b A"};
  const auto v = Vocabulary::build(corpus);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"A", "b", "a", "<unk>"}));
  EXPECT_EQ(v.size(), 4u);
  EXPECT_EQ(v.unk_id(), 3);
  EXPECT_EQ(v.lowercase_of(v.id("A")), v.id("a"));
  EXPECT_EQ(v.lowercase_of(v.id("b")), v.id("b"));
}

TEST(Vocabulary, AlreadyLowercaseWord) {
  const std::vector<std::string> corpus{"x"};
  const auto v = Vocabulary::build(corpus);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"x", "<unk>"}));
}

TEST(Vocabulary, EmptyCorpusThrows) {
  const std::vector<std::string> corpus;
  EXPECT_THROW(Vocabulary::build(corpus), std::invalid_argument);
}

TEST(Vocabulary, HundredDocumentsEncodeWithoutUnk) {
  const SyntheticLanguage lang(5, {});
  std::vector<std::string> docs;
  for (int i = 0; i < 100; ++i) {
    SplitMix64 rng(derive_seed(5, "doc", i));
    docs.push_back(lang.document(40, rng));
  }
  const auto v = Vocabulary::build(docs);
  std::size_t unk = 0;
  for (const auto& d : docs) {
    // Scan oracle: split on whitespace and punctuation independently.
    for (const auto& tok : split_tokens(d)) unk += v.contains(tok) ? 0 : 1;
    for (const auto id : v.encode(d).ids) unk += id == v.unk_id() ? 1 : 0;
  }
  EXPECT_EQ(unk, 0u);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& t = v.token(static_cast<TokenId>(i));
    if (static_cast<TokenId>(i) != v.unk_id()) EXPECT_TRUE(v.contains(ascii_lower(t))) << t;
    EXPECT_LT(static_cast<std::size_t>(v.lowercase_of(static_cast<TokenId>(i))), v.size());
  }
}

TEST(Vocabulary, TokenizerSplitsPunctuation) {
  EXPECT_EQ(split_tokens("Hello, world."), (std::vector<std::string>{"Hello", ",", "world", "."}));
  EXPECT_EQ(split_tokens("  a\tb\n"), (std::vector<std::string>{"a", "b"}));
}

TEST(Vocabulary, RoundTripPreservesNormalizedWords) {
  const Fixture fx = make_fixture(small_fixture());
  const auto texts = fx.all_texts();
  const auto v = Vocabulary::build(texts);
  for (std::size_t i = 0; i < texts.size(); i += 7) {
    const auto seq = v.encode(texts[i]);
    EXPECT_EQ(v.decode(seq.ids), texts[i]);
    EXPECT_EQ(v.encode(v.decode(seq.ids)).ids, seq.ids);
  }
  const std::vector<std::string> odd{"( a ) b , c"};
  const auto v2 = Vocabulary::build(odd);
  const auto seq = v2.encode(odd[0]);
  EXPECT_EQ(v2.encode(v2.decode(seq.ids)).ids, seq.ids);
}

TEST(NGram, HandCountedBigram) {
  const std::vector<std::string> corpus{"a a"};
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::build(corpus));
  ASSERT_EQ(vocab->size(), 2u);
  const auto m = train_ngram(vocab, corpus, 1, 1.0);
  const std::vector<TokenId> ctx{vocab->id("a")};
  EXPECT_NEAR(m.prob(ctx, vocab->id("a")), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.prob(ctx, vocab->unk_id()), 1.0 / 3.0, 1e-15);
}

TEST(NGram, Normalization) {
  const auto t = trained_fixture(2, 0.1, 1);
  const auto& v = *t.vocab;
  const auto doc = v.encode(t.fixture.training_corpus[3]).ids;
  for (std::size_t i = 0; i < 40; ++i) {
    const std::span<const TokenId> ctx(doc.data(), i);
    double s = 0.0;
    for (std::size_t tok = 0; tok < v.size(); ++tok) {
      const double p = t.model->prob(ctx, static_cast<TokenId>(tok));
      EXPECT_GT(p, 0.0);
      s += p;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
    const auto probs = softmax(t.model->next_token_logits(ctx).logits);
    for (std::size_t tok = 0; tok < v.size(); ++tok) {
      EXPECT_NEAR(probs[tok], t.model->prob(ctx, static_cast<TokenId>(tok)), 1e-9);
    }
  }
}

TEST(NGram, InvariantToDocumentOrder) {
  const Fixture fx = make_fixture(small_fixture());
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::build(fx.all_texts()));
  auto shuffled = fx.training_corpus;
  std::mt19937 gen(3);
  std::shuffle(shuffled.begin(), shuffled.end(), gen);
  const auto a = train_ngram(vocab, fx.training_corpus, 2, 0.1);
  const auto b = train_ngram(vocab, shuffled, 2, 0.1);
  EXPECT_EQ(a.to_json(), b.to_json());
  const auto doc = vocab->encode(fx.training_corpus[5]).ids;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::span<const TokenId> ctx(doc.data(), i);
    EXPECT_EQ(a.token_logprob(ctx, doc[i]), b.token_logprob(ctx, doc[i]));
  }
}

TEST(NGram, DuplicationRaisesTargetLikelihoodMonotonically) {
  const Fixture fx = make_fixture(small_fixture());
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::build(fx.all_texts()));
  const auto target = vocab->encode(fx.training_corpus[0]).ids;
  double prev = -std::numeric_limits<double>::infinity();
  double d1 = 0.0;
  for (const std::uint64_t d : {1, 10, 20, 50}) {
    const auto m = train_ngram(vocab, fx.training_corpus, 2, 0.1, Duplication{0, d});
    const double lp = sequence_logprob(m, target, 0);
    EXPECT_GE(lp, prev) << "D=" << d;
    if (d == 1) d1 = lp;
    if (d == 50) EXPECT_GT(lp, d1);
    prev = lp;
  }
}

TEST(NGram, DuplicationIndexOutOfRange) {
  const std::vector<std::string> corpus{"a b", "b a"};
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::build(corpus));
  EXPECT_THROW(train_ngram(vocab, corpus, 1, 1.0, Duplication{2, 5}), std::out_of_range);
}

TEST(NGram, UntrainedIsUniform) {
  const auto vocab = letters(4);
  const NGramModel m(vocab, 2, 1.0);
  const std::vector<TokenId> ctx{0, 1};
  for (const double l : m.next_token_logits(ctx).logits) EXPECT_DOUBLE_EQ(l, std::log(0.25));
  EXPECT_DOUBLE_EQ(m.next_token_logits({}).logits[2], std::log(0.25));
}

TEST(NGram, ArgmaxIsMostFrequentSuccessor) {
  const auto t = trained_fixture(1, 0.1, 1);
  const auto& v = *t.vocab;
  // Count oracle straight from the tokenized corpus.
  std::map<TokenId, std::map<TokenId, int>> counts;
  for (const auto& doc : t.fixture.training_corpus) {
    const auto ids = v.encode(doc).ids;
    for (std::size_t i = 1; i < ids.size(); ++i) counts[ids[i - 1]][ids[i]] += 1;
  }
  int checked = 0;
  for (const auto& [prev, next] : counts) {
    int best = -1;
    TokenId arg = 0;
    for (const auto& [tok, c] : next) {
      if (c > best) {
        best = c;
        arg = tok;
      }
    }
    const std::vector<TokenId> ctx{prev};
    const auto logits = t.model->next_token_logits(ctx).logits;
    const auto it = std::max_element(logits.begin(), logits.end());
    EXPECT_EQ(static_cast<TokenId>(it - logits.begin()), arg);
    if (++checked == 60) break;
  }
}

TEST(NGram, BackoffToShorterContext) {
  const std::vector<std::string> corpus{"a b c", "c b"};
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::build(corpus));
  const auto m = train_ngram(vocab, corpus, 2, 0.5);
  const TokenId a = vocab->id("a"), b = vocab->id("b"), c = vocab->id("c");
  // (c, b) never occurred with a successor; the suffix (b) did, once followed by c.
  const std::vector<TokenId> ctx{c, b};
  const std::vector<TokenId> suffix{b};
  EXPECT_DOUBLE_EQ(m.prob(ctx, c), m.prob(suffix, c));
  EXPECT_DOUBLE_EQ(m.prob(suffix, c), (1 + 0.5) / (1 + 0.5 * 4));
  EXPECT_DOUBLE_EQ(m.prob(std::vector<TokenId>{a, b}, c), (1 + 0.5) / (1 + 0.5 * 4));
}

TEST(NGram, JsonRoundTripReproducesProbabilities) {
  const auto t = trained_fixture(2, 0.1, 10);
  const auto loaded = NGramModel::from_json(t.model->to_json());
  EXPECT_EQ(loaded.to_json(), t.model->to_json());
  const auto doc = t.vocab->encode(t.fixture.training_corpus[0]).ids;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::span<const TokenId> ctx(doc.data(), i);
    const double a = t.model->prob(ctx, doc[i]);
    EXPECT_LT(rel_err(loaded.prob(ctx, doc[i]), a), 1e-12);
  }
}

TEST(NGram, GoldenTinyModelJson) {
  const std::vector<std::string> corpus{"a b a"};
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::build(corpus));
  const auto m = train_ngram(vocab, corpus, 1, 0.5);
  EXPECT_EQ(m.to_json(),
            "{\"alpha\":0.5,\"counts\":[{\"context\":[],\"next\":[[0,2],[1,1]]},"
            "{\"context\":[0],\"next\":[[1,1]]},{\"context\":[1],\"next\":[[0,1]]}],"
            "\"format\":\"wmaudit-ngram-v1\",\"order\":1,\"unk\":\"<unk>\","
            "\"vocab\":[\"a\",\"b\",\"<unk>\"]}\n");
}

TEST(SequenceLogprob, UniformModel) {
  const auto vocab = letters(4);
  const NGramModel m(vocab, 1, 1.0);
  const std::vector<TokenId> toks{0, 1, 2};
  EXPECT_DOUBLE_EQ(sequence_logprob(m, toks, 1), 2.0 * std::log(0.25));
  EXPECT_DOUBLE_EQ(perplexity(m, toks, 0), 4.0);
}

TEST(SequenceLogprob, LastTokenEqualsSoftmaxEntry) {
  const auto t = trained_fixture();
  const auto doc = t.vocab->encode(t.fixture.training_corpus[2]).ids;
  const std::size_t n = doc.size();
  const auto lsm = log_softmax(t.model->next_token_logits(std::span<const TokenId>(doc).first(n - 1)).logits);
  EXPECT_NEAR(sequence_logprob(*t.model, doc, n - 1), lsm[static_cast<std::size_t>(doc[n - 1])], 1e-12);
}

TEST(SequenceLogprob, MatchesStepByStepOracle) {
  const auto t = trained_fixture();
  const WatermarkedModel wm(t.model, WatermarkConfig{Scheme::umd, 0.5, 2.0, 99, WatermarkMode::soft});
  for (std::size_t d = 1; d < 6; ++d) {
    const auto doc = t.vocab->encode(t.fixture.training_corpus[d]).ids;
    for (const LanguageModel* m : {static_cast<const LanguageModel*>(t.model.get()),
                                   static_cast<const LanguageModel*>(&wm)}) {
      for (const std::size_t prompt : {std::size_t{0}, std::size_t{5}}) {
        double prod = 1.0;
        double sum_lp = 0.0;
        for (std::size_t i = prompt; i < doc.size(); ++i) {
          const auto probs = softmax(m->next_token_logits(std::span<const TokenId>(doc).first(i)).logits);
          prod *= probs[static_cast<std::size_t>(doc[i])];
          sum_lp += std::log(probs[static_cast<std::size_t>(doc[i])]);
        }
        const double lp = sequence_logprob(*m, doc, prompt);
        EXPECT_LT(rel_err(std::exp(lp), prod), 1e-9);
        const double n = static_cast<double>(doc.size() - prompt);
        EXPECT_LT(rel_err(perplexity(*m, doc, prompt), std::exp(-sum_lp / n)), 1e-9);
        EXPECT_LT(rel_err(std::pow(perplexity(*m, doc, prompt), -n), std::exp(lp)), 1e-9);
      }
    }
  }
}

TEST(SequenceLogprob, PromptMustLeaveATokenToScore) {
  const auto vocab = letters(4);
  const NGramModel m(vocab, 1, 1.0);
  const std::vector<TokenId> toks{0, 1};
  EXPECT_THROW(sequence_logprob(m, toks, 2), std::invalid_argument);
  EXPECT_THROW(perplexity(m, toks, 5), std::invalid_argument);
}

TEST(Perplexity, ConstantProbabilityGivesInverse) {
  const auto vocab = letters(4);
  const FixedModel m(vocab, {0.8, 0.1, 0.05, 0.05});
  const std::vector<TokenId> toks{0, 0, 0, 0, 0};
  EXPECT_NEAR(perplexity(m, toks, 0), 1.0 / 0.8, 1e-12);
}

TEST(Generate, GreedyFollowsChain) {
  const std::vector<std::string> corpus{"a b c d a b c d a b c d"};
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::build(corpus));
  const auto m = train_ngram(vocab, corpus, 1, 0.01);
  const std::vector<TokenId> prompt{vocab->id("a")};
  const auto out = generate(m, prompt, 7, DecodeMode::greedy, 0);
  EXPECT_EQ(vocab->decode(out), "b c d a b c d");
}

TEST(Generate, SameSeedSameOutput) {
  const auto t = trained_fixture();
  const auto a = generate(*t.model, {}, 50, DecodeMode::multinomial, 17);
  const auto b = generate(*t.model, {}, 50, DecodeMode::multinomial, 17);
  const auto c = generate(*t.model, {}, 50, DecodeMode::multinomial, 18);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Generate, MultinomialFrequenciesMatchSoftmax) {
  const auto vocab = letters(5);
  const std::vector<double> probs{0.4, 0.3, 0.15, 0.1, 0.05};
  const FixedModel m(vocab, probs);
  const int draws = 100000;
  std::vector<int> counts(5, 0);
  for (int i = 0; i < draws; ++i) {
    counts[static_cast<std::size_t>(generate(m, {}, 1, DecodeMode::multinomial, derive_seed(1, "draw", i))[0])]++;
  }
  for (std::size_t t = 0; t < probs.size(); ++t) {
    const double sigma = std::sqrt(draws * probs[t] * (1 - probs[t]));
    EXPECT_LE(std::abs(counts[t] - draws * probs[t]), 3 * sigma) << "token " << t;
  }
}

TEST(Rng, MatchesDocumentedConstants) {
  EXPECT_EQ(mix64(0), 0u);
  EXPECT_EQ(mix64(1), 0x5692161d100b05e5ULL);
  SplitMix64 r(7);
  for (int i = 0; i < 1000; ++i) {
    const auto x = r.below(10);
    EXPECT_LT(x, 10u);
    const double u = r.uniform01();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}
