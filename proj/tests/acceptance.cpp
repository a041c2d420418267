// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "wmaudit/corpus.hpp"
#include "wmaudit/experiment.hpp"
#include "wmaudit/memorization.hpp"
#include "wmaudit/mia.hpp"
#include "wmaudit/recipes.hpp"
#include "wmaudit/theory.hpp"

using namespace wmaudit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Shared default-config data for criteria 5 to 8.
struct Shared {
  ExperimentConfig config;
  ExperimentData data;
  std::shared_ptr<const NGramModel> model;  // target duplicated 50 times
  std::vector<TokenSeq> samples;
};

const Shared& shared() {
  static const Shared s = [] {
    Shared s;
    s.data = load_data(s.config);
    s.model = std::make_shared<const NGramModel>(
        train_ngram(s.data.vocab, s.data.training_corpus, s.config.order, s.config.alpha,
                    Duplication{s.data.target_index, s.config.duplication}));
    s.samples = memorization_samples(s.data, s.config);
    return s;
  }();
  return s;
}

WatermarkConfig soft(Scheme scheme, double gamma, double delta) {
  return WatermarkConfig{scheme, gamma, delta, 0, WatermarkMode::soft};
}

Outcome arithmetic_anchor() {
  const double f = reduction_factor_from_rel_increase(4.1, 32).value();
  const bool ok = f > 4.3e22 && f < 4.4e22 && rel_err(f, std::pow(5.1, 32)) < 1e-3;
  return {ok, "(1+4.1)^32 = " + fmt("%.6e", f)};
}

Outcome hard_bound_anchor() {
  const double b = theorem1_bound(HardBoundInstance{1e9, 100, 1e9, 0.5}).value();
  const double closed = 1e18 * std::pow(2.0, -100);
  const bool ok = b < 1e-12 && rel_err(b, closed) < 1e-9;
  return {ok, "bound = " + fmt("%.10e", b) + ", 1e18*2^-100 = " + fmt("%.10e", closed)};
}

Outcome hard_monte_carlo() {
  const auto toy = theorem1_toy(50, 2, 10, 8, 20240917);
  const auto rep = verify_theorem1(*toy.model, toy.texts, 0.5, 0x5eed, 100000, 1);
  bool ok = rep.passed && rep.empirical <= rep.bound + rep.slack;
  std::string detail = "V=50 m=10 n=8 T=1e5: freq " + fmt("%.3g", rep.empirical) + " <= bound " +
                       fmt("%.3g", rep.bound) + " + 3sd " + fmt("%.2g", rep.slack);
  int agree = 0;
  int total = 0;
  for (const std::size_t V : {3u, 4u}) {
    for (const std::size_t n : {2u, 3u, 4u}) {
      const auto tiny = theorem1_toy(V, 2, 1, n, 100 * V + n);
      const auto r = verify_exhaustive_agreement(*tiny.model, tiny.texts[0], 0.5, 0xabc + n, 20000, 7 * V + n);
      ++total;
      agree += r.passed ? 1 : 0;
    }
  }
  ok = ok && agree == total;
  return {ok, detail + "; exhaustive agreement " + std::to_string(agree) + "/" + std::to_string(total)};
}

Outcome soft_bound_verifier() {
  SplitMix64 rng(derive_seed(20240917, "acceptance-theorem2", 0));
  const double eps[] = {0.05, 0.1, 0.2};
  std::size_t violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const double e = eps[i % 3];
    const auto inst = random_admissible_instance(e, 1 + rng.below(20), rng);
    const auto rep = verify_theorem2(inst, theorem2_delta_threshold(e, inst.min_ratio()) + 1.0);
    violations += rep.violations.size() + (rep.passed ? 0 : 1);
  }
  return {violations == 0, "1000 instances, " + std::to_string(violations) + " violations"};
}

Outcome memorization_direction() {
  const auto& s = shared();
  const auto keys = s.config.keys();
  bool ok = true;
  std::string detail;
  double baseline = 0;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    baseline += generation_quality(s.model, std::nullopt, 100, 42, derive_seed(s.config.master_seed, "quality", k)) /
                static_cast<double>(keys.size());
  }
  for (const Scheme scheme : {Scheme::umd, Scheme::unigram}) {
    for (const std::size_t prompt : s.config.prompt_lengths) {
      double prev = 0;
      for (const double d : {2.0, 5.0, 10.0}) {
        const auto rep = relative_ppl_increase(s.model, soft(scheme, 0.5, d), keys, s.samples, prompt);
        ok = ok && rep.avg_rel_increase > prev;
        prev = rep.avg_rel_increase;
      }
      if (prompt == 0) detail += to_string(scheme) + " avg@10=" + fmt("%.3g", prev) + " ";
    }
    double q = 0;
    for (std::size_t k = 0; k < keys.size(); ++k) {
      WatermarkConfig c = soft(scheme, 0.5, 10.0);
      c.key = keys[k];
      q += generation_quality(s.model, c, 100, 42, derive_seed(s.config.master_seed, "quality", k)) /
           static_cast<double>(keys.size());
    }
    const double q_rel = q / baseline - 1;
    const auto rep = relative_ppl_increase(s.model, soft(scheme, 0.5, 10.0), keys, s.samples, 0);
    ok = ok && rep.avg_rel_increase > 0 && q_rel < rep.avg_rel_increase;
    detail += "quality@10=" + fmt("%.3g", q_rel) + "; ";
  }
  return {ok, detail};
}

Outcome auc_drop_direction() {
  const auto& s = shared();
  const auto keys = s.config.keys();
  const auto reference = std::make_shared<const NGramModel>(train_ngram(
      s.data.vocab, s.data.training_corpus, s.config.reference_order, s.config.reference_alpha));
  SuiteOptions o;
  o.attacks = s.config.sweep_attacks;
  std::size_t cells = 0;
  std::size_t nonneg = 0;
  std::size_t min_side = SIZE_MAX;
  for (const auto& split : s.data.splits) {
    const auto dataset = encode_dataset(*s.data.vocab, split.rows);
    std::size_t members = 0;
    for (const auto& x : dataset) members += x.label == Label::member ? 1 : 0;
    min_side = std::min({min_side, members, dataset.size() - members});
    for (const double g : s.config.gammas) {
      for (const auto& r : attack_suite(s.model, soft(Scheme::umd, g, 10.0), dataset, reference, keys, o)) {
        ++cells;
        nonneg += r.drop >= 0 ? 1 : 0;
      }
    }
  }
  const double frac = static_cast<double>(nonneg) / static_cast<double>(cells);
  return {frac >= 0.8 && min_side >= 200,
          std::to_string(nonneg) + "/" + std::to_string(cells) + " cells with drop >= 0 (" + fmt("%.3f", frac) +
              "), " + std::to_string(min_side) + " samples per side"};
}

Outcome adaptive_recovery() {
  const auto& s = shared();
  const auto keys = s.config.keys();
  SuiteOptions o;
  o.attacks = {Attack::min_k, Attack::adaptive_min_k};
  std::size_t pairs = 0;
  std::size_t wins = 0;
  for (const auto& split : s.data.splits) {
    const auto dataset = encode_dataset(*s.data.vocab, split.rows);
    const auto res = attack_suite(s.model, soft(Scheme::umd, 0.5, 10.0), dataset, nullptr, keys, o);
    for (std::size_t k = 0; k < keys.size(); ++k) {
      ++pairs;
      wins += res[1].per_key[k] >= res[0].per_key[k] ? 1 : 0;
    }
  }
  const double rate = static_cast<double>(wins) / static_cast<double>(pairs);
  return {rate >= 0.75 && pairs == 20,
          std::to_string(wins) + "/" + std::to_string(pairs) + " pairs adaptive >= plain (" + fmt("%.2f", rate) + ")"};
}

Outcome oracle_equivalences() {
  const auto& s = shared();
  SplitMix64 rng(derive_seed(20240917, "acceptance-oracles", 0));
  double auc_err = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> m(1 + rng.below(15)), n(1 + rng.below(15));
    for (auto& x : m) x = static_cast<double>(rng.below(8));
    for (auto& x : n) x = static_cast<double>(rng.below(8));
    long twice = 0;
    for (const double a : m) {
      for (const double b : n) twice += a > b ? 2 : a == b ? 1 : 0;
    }
    auc_err = std::max(auc_err, std::abs(auc(m, n) - static_cast<double>(twice) / (2.0 * m.size() * n.size())));
  }

  double ppl_err = 0;
  const WatermarkedModel wm(s.model, WatermarkConfig{Scheme::umd, 0.5, 5.0, 3, WatermarkMode::soft});
  const LanguageModel* models[] = {s.model.get(), &wm};
  for (const LanguageModel* m : models) {
    for (std::size_t i = 0; i < 4; ++i) {
      const auto& ids = s.samples[i].ids;
      double lp = 0;
      for (std::size_t t = 0; t < ids.size(); ++t) {
        lp += log_softmax(m->next_token_logits(std::span<const TokenId>(ids).first(t)).logits)[ids[t]];
      }
      ppl_err = std::max(ppl_err, rel_err(perplexity(*m, ids, 0), std::exp(-lp / ids.size())));
    }
  }

  bool min_k_exact = true;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> lp(20 + rng.below(100));
    for (auto& x : lp) x = -12 * rng.uniform01();
    const double K = kMinKGrid[rng.below(kMinKGrid.size())];
    auto sorted = lp;
    std::sort(sorted.begin(), sorted.end());
    const auto k = min_k_count(lp.size(), K);
    double sum = 0;
    for (std::size_t j = 0; j < k; ++j) sum += sorted[j];
    min_k_exact = min_k_exact && min_k_from_logprobs(lp, K) == sum / static_cast<double>(k);
  }

  double chain_err = 0;
  const auto keys = s.config.keys();
  for (const double d : {2.0, 5.0, 10.0}) {
    const auto rep = relative_ppl_increase(s.model, soft(Scheme::umd, 0.5, d), keys, s.samples, 10);
    for (const auto& r : rep.rows) {
      const auto chained = reduction_factor_from_rel_increase(r.rel_increase, r.n_scored);
      chain_err = std::max(chain_err, std::abs(std::expm1(chained.log() - r.reduction_factor.log())));
    }
  }
  const bool ok = auc_err < 1e-12 && ppl_err < 1e-9 && min_k_exact && chain_err < 1e-6;
  return {ok, "auc " + fmt("%.1e", auc_err) + ", ppl " + fmt("%.1e", ppl_err) + ", min-k " +
                  (min_k_exact ? "exact" : "MISMATCH") + ", chain " + fmt("%.1e", chain_err)};
}

std::map<std::string, std::string> read_dir(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::string contents = read_file(e.path());
    if (e.path().filename().string().rfind("manifest_", 0) == 0) {
      auto j = nlohmann::json::parse(contents);
      j.erase("wall_clock_seconds");
      contents = j.dump();
    }
    files[e.path().filename().string()] = contents;
  }
  return files;
}

Outcome determinism() {
  const auto root = fs::temp_directory_path() / "wmaudit_acceptance_determinism";
  fs::remove_all(root);
  std::map<unsigned, std::map<std::string, std::string>> runs;
  for (const unsigned threads : {1u, 4u}) {
    ExperimentConfig c;
    c.threads = threads;
    const auto dir = root / ("threads" + std::to_string(threads));
    for (const auto& name : recipe_names()) write_run(dir, name, c, run_recipe(name, c), 0.0);
    runs[threads] = read_dir(dir);
  }
  std::size_t same = 0;
  std::vector<std::string> differing;
  for (const auto& [name, contents] : runs[1]) {
    const auto it = runs[4].find(name);
    if (it != runs[4].end() && it->second == contents) {
      ++same;
    } else {
      differing.push_back(name);
    }
  }
  fs::remove_all(root);
  std::string detail = std::to_string(same) + "/" + std::to_string(runs[1].size()) +
                       " files byte-identical at 1 vs 4 threads across " +
                       std::to_string(recipe_names().size()) + " recipes";
  for (const auto& d : differing) detail += " " + d;
  return {differing.empty() && runs[1].size() == runs[4].size() && !runs[1].empty(), detail};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "arithmetic anchor", 1, arithmetic_anchor},
      {2, "hard-watermark bound anchor", 1, hard_bound_anchor},
      {3, "hard-watermark Monte Carlo", 120, hard_monte_carlo},
      {4, "soft-watermark verifier", 30, soft_bound_verifier},
      {5, "memorization direction", 300, memorization_direction},
      {6, "AUC-drop direction", 600, auc_drop_direction},
      {7, "adaptive recovery", 600, adaptive_recovery},
      {8, "oracle equivalences", 30, oracle_equivalences},
      {9, "determinism", 3600, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = o.passed && in_time;
    failures += pass ? 0 : 1;
    std::printf("%s %d %s: %s [%.2fs / limit %.0fs%s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.limit_seconds, in_time ? "" : ", TOO SLOW");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
