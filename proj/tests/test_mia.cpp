#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "test_support.hpp"
#include "wmaudit/corpus.hpp"
#include "wmaudit/mia.hpp"
#include "wmaudit/rng.hpp"

using namespace wmtest;

namespace {

std::vector<LabeledSample> split_samples(const Trained& t, std::size_t split) {
  return encode_dataset(*t.vocab, t.fixture.splits.at(split).rows);
}

const Trained& shared_fixture() {
  static const Trained t = trained_fixture();
  return t;
}

std::shared_ptr<const NGramModel> reference_model(const Trained& t) {
  static const auto ref = std::make_shared<const NGramModel>(
      train_ngram(t.vocab, t.fixture.training_corpus, 1, 0.1));
  return ref;
}

std::vector<std::uint64_t> keys(int n) {
  std::vector<std::uint64_t> k;
  for (int i = 0; i < n; ++i) k.push_back(derive_seed(5, "wm-key", i));
  return k;
}

}  // namespace

TEST(PplAttack, UniformModelScoresMinusLogV) {
  const auto v = letters(5);
  const FixedModel m(v, {0.2, 0.2, 0.2, 0.2, 0.2});
  TokenSeq s;
  s.ids = {0, 1, 2, 3};
  EXPECT_NEAR(score_ppl(m, s).score, -std::log(5.0), 1e-12);
}

TEST(PplAttack, MoreLikelySampleScoresHigher) {
  const auto& t = shared_fixture();
  const auto target = t.vocab->encode(t.fixture.training_corpus[0]);
  const auto non = split_samples(t, 1).back();  // a nonmember
  ASSERT_EQ(non.label, Label::nonmember);
  EXPECT_GT(score_ppl(*t.model, target).score, score_ppl(*t.model, non.tokens).score);
  EXPECT_NEAR(score_ppl(*t.model, target).score, -std::log(perplexity(*t.model, target.ids, 0)), 1e-12);
}

TEST(SmallerRef, SameModelGivesMinusOne) {
  const auto& t = shared_fixture();
  for (const auto& s : split_samples(t, 0)) {
    EXPECT_DOUBLE_EQ(score_smaller_ref(*t.model, *t.model, s.tokens).score, -1.0);
  }
}

TEST(SmallerRef, ThreeReferenceVariantsDiffer) {
  const auto& t = shared_fixture();
  const auto data = split_samples(t, 1);
  const WatermarkConfig cfg{Scheme::umd, 0.5, 10.0, 0, WatermarkMode::soft};
  std::vector<double> aucs;
  for (const auto v : {ReferenceVariant::unwatermarked, ReferenceVariant::different_key,
                       ReferenceVariant::different_strength}) {
    SuiteOptions o;
    o.attacks = {Attack::smaller_ref};
    o.reference = v;
    const auto r = attack_suite(t.model, cfg, data, reference_model(t), keys(3), o);
    aucs.push_back(r.at(0).auc);
  }
  EXPECT_NE(aucs[0], aucs[1]);
  EXPECT_NE(aucs[0], aucs[2]);
  EXPECT_NE(aucs[1], aucs[2]);
}

TEST(LowercaseAttack, AllLowercaseSampleScoresMinusOne) {
  const auto& t = shared_fixture();
  for (const auto& s : split_samples(t, 0)) {
    TokenSeq low;
    low.ids = t.vocab->lowercase(s.tokens.ids);
    EXPECT_DOUBLE_EQ(score_lowercase(*t.model, low).score, -1.0);
    EXPECT_EQ(t.vocab->lowercase(low.ids), low.ids);
  }
}

TEST(LowercaseAttack, SeparatesMembersOnFixture) {
  const auto& t = shared_fixture();
  const auto data = split_samples(t, 1);
  std::vector<double> scores;
  std::vector<Label> labels;
  for (const auto& s : data) {
    scores.push_back(score_lowercase(*t.model, s.tokens).score);
    labels.push_back(s.label);
  }
  EXPECT_GT(auc(scores, labels), 0.5);
}

TEST(ZlibAttack, CompressedSizesMatchGolden) {
  std::ifstream in(std::string(WMAUDIT_TEST_DATA) + "/zlib_golden.json");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto g = nlohmann::json::parse(ss.str());
  ASSERT_EQ(g.at("level").get<int>(), kZlibLevel);
  for (const auto& c : g.at("cases")) {
    EXPECT_EQ(zlib_compressed_bits(c.at("text").get<std::string>()), 8 * c.at("bytes").get<std::size_t>());
  }
}

TEST(ZlibAttack, ScoreIsNegatedRatio) {
  const auto& t = shared_fixture();
  const auto s = split_samples(t, 0).front().tokens;
  const double expect = -(std::log(perplexity(*t.model, s.ids, 0)) /
                          static_cast<double>(zlib_compressed_bits(s.source_text)));
  EXPECT_LT(rel_err(score_zlib(*t.model, s).score, expect), 1e-12);
  TokenSeq no_text;
  no_text.ids = s.ids;
  const double decoded = -(std::log(perplexity(*t.model, s.ids, 0)) /
                           static_cast<double>(zlib_compressed_bits(t.vocab->decode(s.ids))));
  EXPECT_LT(rel_err(score_zlib(*t.model, no_text).score, decoded), 1e-12);
}

TEST(MinK, WorkedExample) {
  const std::vector<double> lp{std::log(0.1), std::log(0.2), std::log(0.4), std::log(0.8)};
  EXPECT_NEAR(min_k_from_logprobs(lp, 50), -1.9560, 1e-4);
  EXPECT_DOUBLE_EQ(min_k_from_logprobs(lp, 50), (std::log(0.1) + std::log(0.2)) / 2);
  EXPECT_NEAR(min_k_from_logprobs(lp, 50, MinKSpace::prob), std::log(0.15), 1e-12);
}

TEST(MinK, HundredPercentIsPplBitForBit) {
  const auto& t = shared_fixture();
  for (const auto& s : split_samples(t, 1)) {
    EXPECT_EQ(score_min_k(*t.model, s.tokens, 100).score, score_ppl(*t.model, s.tokens).score);
  }
}

TEST(MinK, MatchesFullSortOracle) {
  SplitMix64 rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> lp(1 + rng.below(80));
    for (auto& x : lp) x = -10 * rng.uniform01();
    const double K = kMinKGrid[rng.below(kMinKGrid.size())];
    const std::size_t k = static_cast<std::size_t>(std::floor(lp.size() * K / 100 + 1e-9));
    if (k == 0) {
      EXPECT_THROW(min_k_from_logprobs(lp, K), std::invalid_argument);
      continue;
    }
    auto sorted = lp;
    std::sort(sorted.begin(), sorted.end());
    double s = 0;
    for (std::size_t i = 0; i < k; ++i) s += sorted[i];
    EXPECT_EQ(min_k_from_logprobs(lp, K), s / static_cast<double>(k));
  }
}

TEST(MinK, Errors) {
  const std::vector<double> lp{-1, -2, -3};
  EXPECT_THROW(min_k_from_logprobs(lp, 0), std::invalid_argument);
  EXPECT_THROW(min_k_from_logprobs(lp, 101), std::invalid_argument);
  EXPECT_THROW(min_k_from_logprobs(lp, 20), std::invalid_argument);  // floor(0.6) = 0
  EXPECT_EQ(min_k_count(10, 30), 3u);
}

TEST(BestMinK, ReturnsMaximumOverGrid) {
  const auto& t = shared_fixture();
  const auto data = split_samples(t, 0);
  const auto sel = best_min_k(*t.model, data);
  ASSERT_EQ(sel.auc_per_k.size(), kMinKGrid.size());
  for (std::size_t i = 0; i < kMinKGrid.size(); ++i) EXPECT_GE(sel.auc, sel.auc_per_k[i]);
  const auto it = std::max_element(sel.auc_per_k.begin(), sel.auc_per_k.end());
  EXPECT_EQ(sel.k_percent, kMinKGrid[static_cast<std::size_t>(it - sel.auc_per_k.begin())]);
  EXPECT_EQ(best_min_k(*t.model, data, kMinKGrid, 3).auc_per_k, sel.auc_per_k);
}

TEST(BestMinK, ConstantScoresGiveIdenticalAucs) {
  const auto v = letters(4);
  const FixedModel m(v, {0.25, 0.25, 0.25, 0.25});
  std::vector<LabeledSample> data;
  for (int i = 0; i < 10; ++i) {
    LabeledSample s;
    s.tokens.ids.assign(20, static_cast<TokenId>(i % 3));
    s.label = i % 2 ? Label::member : Label::nonmember;
    data.push_back(s);
  }
  const auto sel = best_min_k(m, data);
  for (const double a : sel.auc_per_k) EXPECT_EQ(a, 0.5);
  EXPECT_EQ(sel.k_percent, kMinKGrid[0]);
}

TEST(AdaptiveMinK, ZeroDeltaIsBitIdentical) {
  const auto& t = shared_fixture();
  const WatermarkConfig cfg{Scheme::umd, 0.5, 0.0, 44, WatermarkMode::soft};
  const WatermarkedModel wm(t.model, cfg);
  for (const auto& s : split_samples(t, 1)) {
    for (const double K : kMinKGrid) {
      EXPECT_EQ(score_adaptive_min_k(wm, cfg, s.tokens, K).score, score_min_k(wm, s.tokens, K).score);
    }
  }
}

TEST(AdaptiveMinK, GreenProbabilityDividedByExpDelta) {
  const auto v = letters(2);  // {a, <unk>}
  const FixedModel m(v, {0.8, 0.2});
  const MaskTable masks(WatermarkConfig{Scheme::unigram, 0.5, 0.0, 0, WatermarkMode::soft}, 2);
  const std::vector<TokenId> seq{0, 1, 0};
  const auto lps = adaptive_logprobs(m, masks, std::log(2.0), seq);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const double p = seq[i] == 0 ? 0.8 : 0.2;
    const bool green = masks.mask_after(0).is_green(seq[i]);
    EXPECT_NEAR(std::exp(lps[i]), green ? p / 2 : p, 1e-12);
  }
}

TEST(AdaptiveMinK, RemovesBiasLeavingOnlyNormalizer) {
  // Watermarked log-prob minus delta on green tokens equals the clean
  // log-prob minus ln(1 + (e^delta - 1) G) for every token.
  const auto& t = shared_fixture();
  const WatermarkConfig cfg{Scheme::umd, 0.5, 5.0, 9, WatermarkMode::soft};
  const WatermarkedModel wm(t.model, cfg);
  for (const auto& s : split_samples(t, 0)) {
    const auto adj = adaptive_logprobs(wm, wm.masks(), 5.0, s.tokens.ids);
    const auto clean = token_logprobs(*t.model, s.tokens.ids, 0);
    for (std::size_t i = 0; i < adj.size(); ++i) {
      const double g = wm.green_mass(std::span<const TokenId>(s.tokens.ids).first(i));
      EXPECT_NEAR(adj[i], clean[i] - std::log1p(std::expm1(5.0) * g), 1e-9);
    }
  }
}

TEST(AdaptiveMinK, SchemeMismatchThrows) {
  const auto& t = shared_fixture();
  const WatermarkedModel wm(t.model, WatermarkConfig{Scheme::umd, 0.5, 5.0, 9, WatermarkMode::soft});
  const auto s = split_samples(t, 0).front().tokens;
  EXPECT_THROW(score_adaptive_min_k(wm, WatermarkConfig{Scheme::unigram, 0.5, 5.0, 9, WatermarkMode::soft}, s, 20),
               std::invalid_argument);
}

TEST(Auc, Examples) {
  EXPECT_EQ(auc(std::vector<double>{3, 4}, std::vector<double>{1, 2}), 1.0);
  EXPECT_EQ(auc(std::vector<double>{1, 2}, std::vector<double>{3, 4}), 0.0);
  EXPECT_EQ(auc(std::vector<double>{1, 1}, std::vector<double>{1, 1}), 0.5);
  EXPECT_EQ(auc(std::vector<double>{1, 3}, std::vector<double>{2}), 0.5);
  EXPECT_THROW(auc(std::vector<double>{}, std::vector<double>{1}), std::invalid_argument);
  EXPECT_THROW(auc(std::vector<double>{std::nan("")}, std::vector<double>{1}), std::invalid_argument);
}

TEST(Auc, MatchesPairwiseCountExactly) {
  SplitMix64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> m(1 + rng.below(12)), n(1 + rng.below(12));
    for (auto& x : m) x = static_cast<double>(rng.below(6));
    for (auto& x : n) x = static_cast<double>(rng.below(6));
    long twice_wins = 0;
    for (const double a : m) {
      for (const double b : n) twice_wins += a > b ? 2 : a == b ? 1 : 0;
    }
    const double exact = static_cast<double>(twice_wins) / (2.0 * m.size() * n.size());
    EXPECT_LT(std::abs(auc(m, n) - exact), 1e-12);
  }
}

TEST(Auc, InvariantUnderMonotoneTransform) {
  SplitMix64 rng(14);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> m(2 + rng.below(20)), n(2 + rng.below(20));
    for (auto& x : m) x = static_cast<double>(rng.below(10)) - 5;
    for (auto& x : n) x = static_cast<double>(rng.below(10)) - 5;
    auto f = [](double x) { return x * x * x + std::exp(x); };
    std::vector<double> fm, fn;
    for (const double x : m) fm.push_back(f(x));
    for (const double x : n) fn.push_back(f(x));
    EXPECT_LT(std::abs(auc(m, n) - auc(fm, fn)), 1e-12);
  }
}

TEST(AttackSuite, NoWatermarkMeansNoDrop) {
  const auto& t = shared_fixture();
  const auto data = split_samples(t, 1);
  const auto res = attack_suite(t.model, std::nullopt, data, reference_model(t), keys(5));
  ASSERT_EQ(res.size(), 6u);
  for (const auto& r : res) {
    EXPECT_EQ(r.drop, 0.0) << to_string(r.attack);
    EXPECT_EQ(r.auc, r.auc_unwatermarked);
    EXPECT_GE(r.auc, 0.0);
    EXPECT_LE(r.auc, 1.0);
    EXPECT_EQ(r.n_members, 40u);
    EXPECT_EQ(r.n_nonmembers, 40u);
  }
}

TEST(AttackSuite, PerKeyStatisticsAndDirectScores) {
  const auto& t = shared_fixture();
  const auto data = split_samples(t, 1);
  const WatermarkConfig cfg{Scheme::umd, 0.5, 10.0, 0, WatermarkMode::soft};
  const auto ks = keys(5);
  const auto res = attack_suite(t.model, cfg, data, reference_model(t), ks);
  for (const auto& r : res) {
    ASSERT_EQ(r.per_key.size(), 5u);
    double m = 0;
    for (const double a : r.per_key) m += a / 5;
    EXPECT_NEAR(r.auc, m, 1e-12);
    EXPECT_EQ(r.auc_std, sample_stddev(r.per_key));
    EXPECT_NEAR(r.drop, r.auc_unwatermarked - r.auc, 1e-15);
  }
  // The ppl cell for key 0 recomputed from per-sample scores.
  WatermarkConfig k0 = cfg;
  k0.key = ks[0];
  const WatermarkedModel wm(t.model, k0);
  std::vector<double> scores;
  std::vector<Label> labels;
  for (const auto& s : data) {
    scores.push_back(score_ppl(wm, s.tokens).score);
    labels.push_back(s.label);
  }
  EXPECT_EQ(res[0].attack, Attack::ppl);
  EXPECT_EQ(res[0].per_key[0], auc(scores, labels));
}

TEST(AttackSuite, SampleStddev) {
  EXPECT_EQ(sample_stddev(std::vector<double>{1.0}), 0.0);
  EXPECT_NEAR(sample_stddev(std::vector<double>{1, 2, 3, 4}), std::sqrt(5.0 / 3.0), 1e-15);
}
