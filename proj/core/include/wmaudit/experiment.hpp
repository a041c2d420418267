#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wmaudit/fixture.hpp"
#include "wmaudit/mia.hpp"
#include "wmaudit/watermark.hpp"

namespace wmaudit {

/// Toolkit version string baked in at build time.
std::string toolkit_version();

/// Environment variable that overrides ExperimentConfig::output_dir.
inline constexpr const char* kOutputDirEnv = "WMAUDIT_OUT_DIR";

struct BoundsParams {
  // Closed-form hard-watermark instance.
  double m_count = 1e9;
  double T_trials = 1e9;
  double n_len = 100;
  double gamma = 0.5;
  // Soft-watermark bound and corollary.
  std::vector<double> epsilons{0.05, 0.1, 0.2};
  double m_conf = 0.2;
  double delta = 0.0;  // 0: pick threshold + 1 per instance
  std::size_t theorem2_instances = 1000;
  std::size_t theorem2_max_tokens = 20;
  std::size_t corollary_n = 100;
  double corollary_m = 1e3;
  double corollary_T = 1e3;
  // Hard-watermark Monte Carlo on a toy model.
  std::size_t toy_vocab = 50;
  int toy_order = 2;
  std::size_t toy_texts = 10;
  std::size_t toy_len = 8;
  std::uint64_t mc_trials = 100000;
  // Exhaustive-vs-Monte-Carlo agreement on a tiny model.
  std::size_t tiny_vocab = 4;
  std::size_t tiny_len = 3;
  std::uint64_t tiny_trials = 20000;
};

/// Everything a recipe needs. Loaded from JSON; missing keys keep their
/// defaults. `threads` and `output_dir` do not enter the config hash.
struct ExperimentConfig {
  // Data. Empty paths select the built-in synthetic fixture.
  std::string corpus_path;
  std::string dataset_path;
  FixtureOptions fixture{};

  // Models.
  int order = 2;
  double alpha = 0.1;
  int reference_order = 1;
  double reference_alpha = 0.1;
  int approx_order = 6;  // model used for the greedy-completion recipe

  // Watermark grid.
  std::vector<Scheme> schemes{Scheme::umd, Scheme::unigram};
  double gamma = 0.5;
  double delta = 10.0;
  std::vector<double> gammas{0.3, 0.4, 0.5, 0.6, 0.7};
  std::vector<double> deltas{0.0, 2.0, 5.0, 10.0};
  std::size_t key_count = 5;
  WatermarkMode mode = WatermarkMode::soft;

  // Membership inference.
  std::vector<Attack> attacks{Attack::ppl, Attack::smaller_ref, Attack::lowercase, Attack::zlib,
                              Attack::min_k, Attack::adaptive_min_k};
  std::vector<Attack> sweep_attacks{Attack::ppl, Attack::lowercase, Attack::zlib, Attack::min_k};
  std::vector<ReferenceVariant> reference_variants{ReferenceVariant::unwatermarked,
                                                   ReferenceVariant::different_key,
                                                   ReferenceVariant::different_strength};
  double reference_delta_ratio = 0.5;
  std::vector<double> min_k_grid{kMinKGrid.begin(), kMinKGrid.end()};

  // Memorization.
  std::vector<std::size_t> prompt_lengths{0, 10, 20};
  std::size_t target_index = 0;
  std::uint64_t duplication = 50;
  std::vector<std::uint64_t> duplication_factors{1, 10, 20, 50};
  std::size_t sample_tokens = 64;  // target is cut into windows of this many tokens
  std::size_t prefix_words = 256;
  std::size_t quality_samples = 100;
  std::size_t quality_max_len = 42;

  BoundsParams bounds{};

  std::string output_dir = "wmaudit-out";
  std::uint64_t master_seed = 20240917;
  unsigned threads = 1;

  /// Throws std::invalid_argument naming the first unusable field.
  void validate() const;

  /// Canonical JSON (sorted keys). `include_runtime` adds threads and
  /// output_dir.
  std::string to_json(bool include_runtime = true) const;
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);

  /// FNV-1a of to_json(false), as 16 hex digits.
  std::string hash() const;

  /// Watermark key k: derive_seed(master_seed, "wm-key", k).
  std::vector<std::uint64_t> keys() const;

  /// output_dir, or the environment override when set.
  std::filesystem::path resolved_output_dir() const;
};

struct Artifact {
  std::string name;  // file name inside the output directory
  std::string contents;
};

struct RunManifest {
  std::string recipe;
  std::string config_hash;
  std::string version;
  std::vector<std::string> artifacts;
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> keys;
  double wall_clock_seconds = 0.0;

  std::string to_json() const;
};

}  // namespace wmaudit
