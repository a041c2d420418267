#include "wmaudit/theory.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "wmaudit/parallel.hpp"
#include "wmaudit/watermark.hpp"

namespace wmaudit {
namespace {

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 0.25)) {
    throw HypothesisError("epsilon must lie in (0, 1/4)");
  }
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

}  // namespace

void HardBoundInstance::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw HypothesisError("gamma must lie in (0, 1)");
  if (!(m_count >= 1.0) || !(n_len >= 1.0) || !(T_trials >= 1.0)) {
    throw HypothesisError("m_count, n_len and T_trials must all be >= 1");
  }
  const double log_m_gamma_n = std::log(m_count) + n_len * std::log(gamma);
  if (!(log_m_gamma_n < 0.0)) {
    throw HypothesisError("hypothesis m_count * gamma^n < 1 violated (m_count * gamma^n = " +
                          fmt(std::exp(log_m_gamma_n)) + ")");
  }
}

LogScalar theorem1_bound(const HardBoundInstance& inst) {
  inst.validate();
  return LogScalar::from_log(std::log(inst.m_count) + std::log(inst.T_trials) +
                             inst.n_len * std::log(inst.gamma));
}

double theorem2_M(double epsilon) {
  check_epsilon(epsilon);
  return (1.0 - 4.0 * epsilon) / (1.0 + 4.0 * epsilon);
}

double theorem2_delta_threshold(double epsilon, double m_conf) {
  check_epsilon(epsilon);
  if (!(m_conf > 0.0)) throw HypothesisError("m_conf must be > 0");
  const double numerator = 1.0 - 2.0 * epsilon * (m_conf + 1.0);
  if (!(numerator > 0.0)) {
    throw HypothesisError("1 - 2 eps (m_conf + 1) must be > 0 (got " + fmt(numerator) + ")");
  }
  return std::log(numerator / (2.0 * epsilon * m_conf));
}

LogScalar theorem2_reduction_factor(double epsilon, std::size_t n) {
  check_epsilon(epsilon);
  return LogScalar::from_log(static_cast<double>(n) *
                             std::log1p(2.0 * epsilon / (2.0 * epsilon + 1.0)));
}

LogScalar corollary_trial_bound(double epsilon, std::size_t n, double m_count, double T) {
  check_epsilon(epsilon);
  if (!(m_count >= 1.0) || !(T >= 1.0)) throw HypothesisError("m_count and T must be >= 1");
  return LogScalar::from_log(std::log(m_count) + std::log(T) +
                             static_cast<double>(n) *
                                 std::log((2.0 * epsilon + 1.0) / (4.0 * epsilon + 1.0)));
}

double SoftmaxInstance::min_ratio() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& t : tokens) {
    for (const double x : {t.d, t.b_green, t.c_green, t.b_red, t.c_red}) m = std::min(m, x / t.a);
  }
  return m;
}

double SoftmaxInstance::max_ratio() const {
  double m = 0.0;
  for (const auto& t : tokens) {
    for (const double x : {t.d, t.b_green, t.c_green, t.b_red, t.c_red}) m = std::max(m, x / t.a);
  }
  return m;
}

void SoftmaxInstance::validate() const {
  const double M = theorem2_M(epsilon);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    const std::string at = " at token " + std::to_string(i);
    for (const double x : {t.a, t.d, t.b_green, t.c_green, t.b_red, t.c_red}) {
      if (!(x > 0.0) || !std::isfinite(x)) throw HypothesisError("non-positive softmax mass" + at);
    }
    const double tol = 1e-12 * t.d;
    if (std::abs(t.b_green + t.c_green - t.d) > tol || std::abs(t.b_red + t.c_red - t.d) > tol) {
      throw HypothesisError("b + c must equal d" + at);
    }
    for (const double x : {t.d, t.b_green, t.c_green, t.b_red, t.c_red}) {
      if (!(x / t.a < M)) throw HypothesisError("confidence condition x / a < M violated" + at);
    }
  }
}

SoftmaxInstance random_admissible_instance(double epsilon, std::size_t n_tokens, SplitMix64& rng) {
  const double M = theorem2_M(epsilon);
  SoftmaxInstance inst;
  inst.epsilon = epsilon;
  const double floor_ratio = M * (0.05 + 0.4 * rng.uniform01());
  auto split = [&](double d) {
    const double b = floor_ratio + (d - 2.0 * floor_ratio) * rng.uniform01();
    return std::pair{b, d - b};
  };
  for (std::size_t i = 0; i < n_tokens; ++i) {
    SoftmaxToken t;
    t.a = 1.0;
    t.d = 2.0 * floor_ratio + (M - 2.0 * floor_ratio) * rng.uniform01();
    std::tie(t.b_green, t.c_green) = split(t.d);
    std::tie(t.b_red, t.c_red) = split(t.d);
    inst.tokens.push_back(t);
  }
  return inst;
}

std::string BoundCheckReport::to_json() const {
  const nlohmann::json j = {{"name", name},
                            {"bound", bound},
                            {"empirical", empirical},
                            {"log_bound", log_bound},
                            {"log_empirical", log_empirical},
                            {"slack", slack},
                            {"trials", trials},
                            {"passed", passed},
                            {"note", note},
                            {"violations", violations}};
  return j.dump();
}

Theorem2Token theorem2_token(const SoftmaxToken& t, double delta) {
  const double e = std::exp(delta);
  Theorem2Token out;
  out.p_unwm = t.a / (t.d + t.a);
  out.p_wm_expected = 0.5 * (t.a * e) / (t.b_green + t.c_green * e + t.a * e) +
                      0.5 * t.a / (t.b_red + t.c_red * e + t.a);
  return out;
}

BoundCheckReport verify_theorem2(const SoftmaxInstance& inst, double delta) {
  inst.validate();
  const double eps = inst.epsilon;
  const double threshold = theorem2_delta_threshold(eps, inst.min_ratio());
  if (!(delta > threshold)) {
    throw HypothesisError("delta " + fmt(delta) + " does not exceed the threshold " + fmt(threshold));
  }
  BoundCheckReport r;
  r.name = "theorem2";
  r.trials = inst.tokens.size();
  double log_unwm = 0.0;
  double log_wm = 0.0;
  for (std::size_t i = 0; i < inst.tokens.size(); ++i) {
    const auto p = theorem2_token(inst.tokens[i], delta);
    if (!(p.p_unwm > 0.5 + 2.0 * eps)) {
      r.violations.push_back("token " + std::to_string(i) + ": p_unwm " + fmt(p.p_unwm) + " <= 1/2 + 2 eps");
    }
    if (!(p.p_wm_expected < 0.5 + eps)) {
      r.violations.push_back("token " + std::to_string(i) + ": p_wm " + fmt(p.p_wm_expected) + " >= 1/2 + eps");
    }
    log_unwm += std::log(p.p_unwm);
    log_wm += std::log(p.p_wm_expected);
  }
  // Expressed as an upper bound on P_wm(s) / P_unwm(s).
  r.log_bound = -theorem2_reduction_factor(eps, inst.tokens.size()).log();
  r.log_empirical = log_wm - log_unwm;
  r.bound = std::exp(r.log_bound);
  r.empirical = std::exp(r.log_empirical);
  if (!(r.log_empirical <= r.log_bound)) r.violations.push_back("product reduction below the bound");
  r.passed = r.violations.empty();
  r.note = "exact evaluation; delta threshold " + fmt(threshold);
  return r;
}

double exhaustive_hard_generation_probability(const NGramModel& model,
                                              std::span<const TokenId> text, double gamma) {
  const std::size_t V = model.vocab_size();
  const std::size_t g = green_count(V, gamma);
  if (g < 1 || g >= V) throw std::invalid_argument("exhaustive: floor(gamma V) must be in [1, V-1]");
  if (text.empty()) return 1.0;

  std::vector<GreenMask> subsets;
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << V); ++bits) {
    if (static_cast<std::size_t>(std::popcount(bits)) != g) continue;
    GreenMask m(V);
    for (std::size_t v = 0; v < V; ++v) {
      if ((bits >> v) & 1U) m.set_green(static_cast<TokenId>(v));
    }
    subsets.push_back(std::move(m));
  }

  std::map<TokenId, std::size_t> slot;  // previous-token id -> position in the choice vector
  std::vector<TokenId> prevs(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    prevs[i] = i == 0 ? umd_sentinel(V) : text[i - 1];
    slot.emplace(prevs[i], slot.size());
  }
  const double combos = std::pow(static_cast<double>(subsets.size()), static_cast<double>(slot.size()));
  if (combos > 5e7) throw std::invalid_argument("exhaustive: too many mask assignments");

  // Unwatermarked next-token distributions along the text.
  std::vector<std::vector<double>> probs(text.size(), std::vector<double>(V));
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto dist = model.distribution(text.first(i));
    for (std::size_t v = 0; v < V; ++v) probs[i][v] = dist.prob(static_cast<TokenId>(v));
  }

  std::vector<std::size_t> choice(slot.size(), 0);
  double total = 0.0;
  std::uint64_t count = 0;
  for (;;) {
    double p = 1.0;
    for (std::size_t i = 0; i < text.size() && p > 0.0; ++i) {
      const auto& mask = subsets[choice[slot.at(prevs[i])]];
      if (!mask.is_green(text[i])) {
        p = 0.0;
        break;
      }
      double green_mass = 0.0;
      for (std::size_t v = 0; v < V; ++v) {
        if (mask.is_green(static_cast<TokenId>(v))) green_mass += probs[i][v];
      }
      p *= probs[i][static_cast<std::size_t>(text[i])] / green_mass;
    }
    total += p;
    ++count;
    std::size_t d = 0;
    while (d < choice.size() && ++choice[d] == subsets.size()) choice[d++] = 0;
    if (d == choice.size()) break;
  }
  return total / static_cast<double>(count);
}

HitCount count_hard_hits(const NGramModel& model, std::span<const std::vector<TokenId>> texts,
                         double gamma, std::uint64_t key, std::uint64_t trials,
                         std::uint64_t rng_seed, unsigned threads) {
  if (texts.empty()) throw std::invalid_argument("count_hard_hits: no texts");
  const std::size_t n = texts.front().size();
  for (const auto& t : texts) {
    if (t.size() != n || n == 0) throw std::invalid_argument("count_hard_hits: texts must share one non-zero length");
  }
  const std::size_t V = model.vocab_size();
  WatermarkConfig{Scheme::umd, gamma, 0.0, key, WatermarkMode::hard}.validate(V);

  constexpr std::uint64_t kBlock = 4096;
  const std::uint64_t n_blocks = (trials + kBlock - 1) / kBlock;
  std::vector<std::uint64_t> block_hits(n_blocks, 0);
  parallel_for(n_blocks, threads, [&](std::size_t b) {
    std::vector<TokenId> text;
    std::vector<double> probs(V);
    std::vector<std::size_t> alive;
    const std::uint64_t end = std::min<std::uint64_t>(trials, (b + 1) * kBlock);
    for (std::uint64_t t = b * kBlock; t < end; ++t) {
      const std::uint64_t trial_key = derive_seed(key, "theorem1-key", t);
      SplitMix64 rng(derive_seed(rng_seed, "theorem1-sample", t));
      text.clear();
      alive.resize(texts.size());
      for (std::size_t j = 0; j < texts.size(); ++j) alive[j] = j;
      for (std::size_t step = 0; step < n && !alive.empty(); ++step) {
        const TokenId prev = text.empty() ? umd_sentinel(V) : text.back();
        const GreenMask mask = partition_umd(prev, V, gamma, trial_key);
        const auto dist = model.distribution(text);
        double green_mass = 0.0;
        for (std::size_t v = 0; v < V; ++v) {
          probs[v] = mask.is_green(static_cast<TokenId>(v)) ? dist.prob(static_cast<TokenId>(v)) : 0.0;
          green_mass += probs[v];
        }
        for (double& p : probs) p /= green_mass;
        text.push_back(sample_from(probs, rng.uniform01()));
        std::erase_if(alive, [&](std::size_t j) { return texts[j][step] != text.back(); });
      }
      if (!alive.empty()) ++block_hits[b];
    }
  });
  HitCount out;
  out.trials = trials;
  for (const auto h : block_hits) out.hits += h;
  return out;
}

BoundCheckReport verify_theorem1(const NGramModel& model,
                                 std::span<const std::vector<TokenId>> texts, double gamma,
                                 std::uint64_t key, std::uint64_t trials, std::uint64_t rng_seed,
                                 unsigned threads) {
  if (texts.empty()) throw HypothesisError("verify_theorem1: empty copyrighted set");
  if (trials == 0) throw HypothesisError("verify_theorem1: trials must be >= 1");
  const std::size_t n = texts.front().size();
  for (const auto& t : texts) {
    if (t.size() != n) throw HypothesisError("verify_theorem1: all texts must have the same length");
    std::map<std::pair<TokenId, TokenId>, int> pairs;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const TokenId prev = i == 0 ? umd_sentinel(model.vocab_size()) : t[i - 1];
      if (++pairs[{prev, t[i]}] > 1) {
        throw HypothesisError("verify_theorem1: a text repeats a (previous, next) token pair");
      }
    }
  }
  HardBoundInstance per_trial{static_cast<double>(texts.size()), static_cast<double>(n), 1.0, gamma};
  const LogScalar bound = theorem1_bound(per_trial);
  HardBoundInstance over_T = per_trial;
  over_T.T_trials = static_cast<double>(trials);
  const LogScalar bound_T = theorem1_bound(over_T);

  const HitCount hits = count_hard_hits(model, texts, gamma, key, trials, rng_seed, threads);
  BoundCheckReport r;
  r.name = "theorem1";
  r.trials = trials;
  r.bound = bound.value();
  r.log_bound = bound.log();
  r.empirical = hits.frequency();
  r.log_empirical = std::log(r.empirical);
  r.slack = 3.0 * std::sqrt(r.bound * (1.0 - r.bound) / static_cast<double>(trials));
  r.passed = r.empirical <= r.bound + r.slack;
  const double any_hit_T = -std::expm1(static_cast<double>(trials) * std::log1p(-r.empirical));
  r.note = "Monte Carlo, per-trial frequency vs m*gamma^n with 3 sigma slack; hits=" +
           std::to_string(hits.hits) + "; T-trial bound m*T*gamma^n=" + bound_T.to_scientific() +
           "; empirical P(any hit in T)=" + fmt(any_hit_T);
  if (!r.passed) r.violations.push_back("empirical frequency exceeds bound + 3 sigma");
  return r;
}

BoundCheckReport verify_exhaustive_agreement(const NGramModel& model, std::span<const TokenId> text,
                                             double gamma, std::uint64_t key,
                                             std::uint64_t trials, std::uint64_t rng_seed,
                                             unsigned threads) {
  if (trials == 0) throw HypothesisError("verify_exhaustive_agreement: trials must be >= 1");
  const double exact = exhaustive_hard_generation_probability(model, text, gamma);
  const std::vector<std::vector<TokenId>> texts{{text.begin(), text.end()}};
  const HitCount hits = count_hard_hits(model, texts, gamma, key, trials, rng_seed, threads);
  BoundCheckReport r;
  r.name = "theorem1-exhaustive";
  r.trials = trials;
  r.bound = exact;
  r.log_bound = std::log(exact);
  r.empirical = hits.frequency();
  r.log_empirical = std::log(r.empirical);
  r.slack = 3.0 * std::sqrt(exact * (1.0 - exact) / static_cast<double>(trials));
  const double gamma_n = std::pow(gamma, static_cast<double>(text.size()));
  if (!(std::abs(r.empirical - exact) <= r.slack)) {
    r.violations.push_back("Monte Carlo frequency differs from the exact probability by more than 3 sigma");
  }
  if (!(exact <= gamma_n * (1.0 + 1e-12))) {
    r.violations.push_back("exact probability exceeds gamma^n");
  }
  r.passed = r.violations.empty();
  r.note = "exact probability by enumeration over green-list assignments; gamma^n=" + fmt(gamma_n) +
           "; hits=" + std::to_string(hits.hits);
  return r;
}

Theorem1Toy theorem1_toy(std::size_t vocab_size, int order, std::size_t m_count, std::size_t n_len,
                         std::uint64_t seed) {
  if (vocab_size < 3) throw std::invalid_argument("theorem1_toy: vocabulary needs >= 3 tokens");
  if (m_count < 1 || n_len < 1) throw std::invalid_argument("theorem1_toy: empty text set");
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i + 1 < vocab_size; ++i) tokens.push_back("t" + std::to_string(i));
  tokens.emplace_back(kUnkToken);
  auto vocab = std::make_shared<const Vocabulary>(std::move(tokens));
  const auto words = static_cast<std::uint64_t>(vocab_size - 1);
  const auto sentinel = umd_sentinel(vocab_size);

  Theorem1Toy toy;
  SplitMix64 rng(derive_seed(seed, "theorem1-toy", 0));
  std::size_t attempts = 0;
  while (toy.texts.size() < m_count) {
    if (++attempts > 100000) throw std::invalid_argument("theorem1_toy: cannot draw distinct texts");
    std::vector<TokenId> text;
    std::map<std::pair<TokenId, TokenId>, int> pairs;
    bool ok = true;
    for (std::size_t i = 0; i < n_len && ok; ++i) {
      const auto t = static_cast<TokenId>(rng.below(words));
      ok = ++pairs[{i == 0 ? sentinel : text.back(), t}] == 1;
      text.push_back(t);
    }
    if (ok && std::find(toy.texts.begin(), toy.texts.end(), text) == toy.texts.end()) {
      toy.texts.push_back(std::move(text));
    }
  }
  toy.model = std::make_shared<const NGramModel>(NGramModel::train(vocab, toy.texts, order, 0.01));
  return toy;
}

}  // namespace wmaudit
