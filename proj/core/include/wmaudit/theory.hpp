#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wmaudit/logspace.hpp"
#include "wmaudit/ngram.hpp"
#include "wmaudit/rng.hpp"

namespace wmaudit {

/// A bound's hypothesis or a verifier's precondition does not hold. The
/// guarantee is vacuous, which is different from the bound failing.
class HypothesisError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Hard-watermark setting: m_count protected texts of n_len tokens each,
/// T_trials generation attempts, green fraction gamma.
struct HardBoundInstance {
  double m_count = 1;
  double n_len = 1;
  double T_trials = 1;
  double gamma = 0.5;

  /// Throws HypothesisError unless m_count * gamma^n_len < 1, counts are
  /// >= 1 and gamma is in (0,1).
  void validate() const;
};

/// m * T * gamma^n, evaluated in log space.
LogScalar theorem1_bound(const HardBoundInstance& inst);

/// M = (1 - 4 eps) / (1 + 4 eps); eps in (0, 1/4).
double theorem2_M(double epsilon);

/// ln((1 - 2 eps (m_conf + 1)) / (2 eps m_conf)), where m_conf > 0 lower
/// bounds every x / a_i. Throws HypothesisError when the argument of the
/// logarithm is not positive.
double theorem2_delta_threshold(double epsilon, double m_conf);

/// (1 + 2 eps / (2 eps + 1))^n in log space.
LogScalar theorem2_reduction_factor(double epsilon, std::size_t n);

/// m * T * ((2 eps + 1) / (4 eps + 1))^n in log space.
LogScalar corollary_trial_bound(double epsilon, std::size_t n, double m_count, double T);

/// Per-token softmax decomposition. `a` is the exp-logit of the true token,
/// `d` the sum of all other exp-logits. When the true token is green the
/// other mass splits into red `b_green` and green `c_green`; when it is red
/// into red `b_red` and green `c_red`.
struct SoftmaxToken {
  double a = 1.0;
  double d = 0.0;
  double b_green = 0.0;
  double c_green = 0.0;
  double b_red = 0.0;
  double c_red = 0.0;
};

struct SoftmaxInstance {
  double epsilon = 0.1;
  std::vector<SoftmaxToken> tokens;

  /// Smallest x / a_i over x in {d, b', c', b'', c''}.
  double min_ratio() const;
  /// Largest such ratio.
  double max_ratio() const;
  /// Throws HypothesisError unless eps is in (0, 1/4), every quantity is
  /// positive, b + c = d in both cases and every ratio is below M.
  void validate() const;
};

/// Draws an admissible instance: a_i = 1 and every ratio in
/// [m_floor, M) for a random m_floor in (0, M/2).
SoftmaxInstance random_admissible_instance(double epsilon, std::size_t n_tokens, SplitMix64& rng);

struct BoundCheckReport {
  std::string name;
  double bound = 0.0;
  double empirical = 0.0;
  double log_bound = 0.0;
  double log_empirical = 0.0;
  double slack = 0.0;  // 3 sigma for Monte Carlo checks, 0 for exact ones
  std::uint64_t trials = 0;
  bool passed = false;
  std::string note;
  std::vector<std::string> violations;

  std::string to_json() const;
};

/// p_unwm = a / (d + a) per token, and the expected watermarked probability
/// with gamma = 1/2:
///   p_wm = 1/2 a e^delta / (b' + c' e^delta + a e^delta) + 1/2 a / (b'' + c'' e^delta + a).
struct Theorem2Token {
  double p_unwm = 0.0;
  double p_wm_expected = 0.0;
};
Theorem2Token theorem2_token(const SoftmaxToken& tok, double delta);

/// Checks p_unwm > 1/2 + 2 eps and p_wm < 1/2 + eps for every token, and
/// prod p_unwm / prod p_wm >= theorem2_reduction_factor(eps, n). Throws
/// HypothesisError if the instance is inadmissible or delta does not
/// exceed the threshold for m_conf = min_ratio().
BoundCheckReport verify_theorem2(const SoftmaxInstance& inst, double delta);

/// Exact probability that a hard UMD watermark lets `model` emit `text`
/// from an empty prompt, averaging over every assignment of green lists to
/// the previous-token ids the text uses (each list a uniformly chosen
/// floor(gamma V)-subset). Intended for V <= 8 and short texts.
double exhaustive_hard_generation_probability(const NGramModel& model,
                                              std::span<const TokenId> text, double gamma);

struct HitCount {
  std::uint64_t hits = 0;
  std::uint64_t trials = 0;
  double frequency() const { return trials ? static_cast<double>(hits) / static_cast<double>(trials) : 0.0; }
};

/// Runs `trials` hard-UMD generations of max text length from an empty
/// prompt; trial t uses watermark key derive_seed(key, "theorem1-key", t)
/// and sampling stream derive_seed(rng_seed, "theorem1-sample", t). A hit
/// is an exact match with any text in `texts`.
HitCount count_hard_hits(const NGramModel& model, std::span<const std::vector<TokenId>> texts,
                         double gamma, std::uint64_t key, std::uint64_t trials,
                         std::uint64_t rng_seed, unsigned threads = 1);

/// Empirical per-trial hit frequency against m * gamma^n (plus 3 sigma).
/// All texts must share one length n; texts must not repeat a
/// (previous token, token) pair. Also reports the T-trial bound
/// m * T * gamma^n in the note.
BoundCheckReport verify_theorem1(const NGramModel& model,
                                 std::span<const std::vector<TokenId>> texts, double gamma,
                                 std::uint64_t key, std::uint64_t trials, std::uint64_t rng_seed,
                                 unsigned threads = 1);

/// Monte-Carlo hit frequency of one text against its exact hard-UMD
/// generation probability (exhaustive_hard_generation_probability); passes
/// when they agree within 3 sigma and the exact value is at most gamma^n.
BoundCheckReport verify_exhaustive_agreement(const NGramModel& model, std::span<const TokenId> text,
                                             double gamma, std::uint64_t key,
                                             std::uint64_t trials, std::uint64_t rng_seed,
                                             unsigned threads = 1);

/// A toy model for the hard-watermark checks: vocabulary t0..t{V-2} plus UNK,
/// `m_count` random texts of `n_len` tokens with no repeated
/// (previous, next) pair, and an n-gram model (alpha 0.01) trained on
/// exactly those texts so that each is likely without a watermark.
struct Theorem1Toy {
  std::shared_ptr<const NGramModel> model;
  std::vector<std::vector<TokenId>> texts;
};
Theorem1Toy theorem1_toy(std::size_t vocab_size, int order, std::size_t m_count, std::size_t n_len,
                         std::uint64_t seed);

}  // namespace wmaudit
