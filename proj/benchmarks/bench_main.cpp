#include <memory>
#include <vector>

#include <benchmark/benchmark.h>

#include "wmaudit/fixture.hpp"
#include "wmaudit/mia.hpp"
#include "wmaudit/ngram.hpp"
#include "wmaudit/rng.hpp"
#include "wmaudit/watermark.hpp"

namespace {

using namespace wmaudit;

struct Setup {
  std::shared_ptr<const Vocabulary> vocab;
  std::shared_ptr<const NGramModel> model;
  std::vector<TokenSeq> docs;
};

const Setup& setup() {
  static const Setup s = [] {
    FixtureOptions fo;
    fo.per_side = 50;
    fo.background_docs = 200;
    const Fixture fx = make_fixture(fo);
    Setup out;
    out.vocab = std::make_shared<const Vocabulary>(Vocabulary::build(fx.all_texts()));
    out.model = std::make_shared<const NGramModel>(
        train_ngram(out.vocab, fx.training_corpus, 2, 0.1, Duplication{0, 50}));
    for (const auto& r : fx.splits.back().rows) out.docs.push_back(out.vocab->encode(r.text));
    return out;
  }();
  return s;
}

void BM_PartitionUmd(benchmark::State& state) {
  const auto V = static_cast<std::size_t>(state.range(0));
  TokenId prev = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(partition_umd(prev, V, 0.5, 0x1234));
    prev = static_cast<TokenId>((prev + 1) % static_cast<TokenId>(V));
  }
}
BENCHMARK(BM_PartitionUmd)->Arg(1000)->Arg(32000);

void BM_MaskTable(benchmark::State& state) {
  const auto V = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(MaskTable(WatermarkConfig{Scheme::umd, 0.5, 10, 7, WatermarkMode::soft}, V));
  }
}
BENCHMARK(BM_MaskTable)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_SequenceLogprobWatermarked(benchmark::State& state) {
  const auto& s = setup();
  const WatermarkedModel wm(s.model, WatermarkConfig{Scheme::umd, 0.5, 10, 7, WatermarkMode::soft});
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sequence_logprob(wm, s.docs[i % s.docs.size()].ids, 0));
    ++i;
  }
}
BENCHMARK(BM_SequenceLogprobWatermarked);

void BM_NextTokenLogits(benchmark::State& state) {
  const auto& s = setup();
  const auto& doc = s.docs.front().ids;
  for (auto _ : state) {
    benchmark::DoNotOptimize(s.model->next_token_logits(std::span<const TokenId>(doc).first(10)));
  }
}
BENCHMARK(BM_NextTokenLogits);

void BM_Auc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  SplitMix64 rng(1);
  std::vector<double> a(n), b(n);
  for (auto& x : a) x = rng.uniform01() + 0.1;
  for (auto& x : b) x = rng.uniform01();
  for (auto _ : state) benchmark::DoNotOptimize(auc(a, b));
}
BENCHMARK(BM_Auc)->Arg(200)->Arg(10000);

void BM_ZlibBits(benchmark::State& state) {
  const auto& s = setup();
  const std::string text = s.vocab->decode(s.docs.front().ids);
  for (auto _ : state) benchmark::DoNotOptimize(zlib_compressed_bits(text));
}
BENCHMARK(BM_ZlibBits);

}  // namespace

BENCHMARK_MAIN();
