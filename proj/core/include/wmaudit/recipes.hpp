#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "wmaudit/experiment.hpp"
#include "wmaudit/fixture.hpp"
#include "wmaudit/ngram.hpp"

namespace wmaudit {

/// Corpus, vocabulary and labeled splits resolved from a config: files when
/// paths are set, the synthetic fixture otherwise. A dataset file becomes a
/// single split named "dataset".
struct ExperimentData {
  std::shared_ptr<const Vocabulary> vocab;
  std::vector<std::string> training_corpus;
  std::size_t target_index = 0;
  std::vector<DatasetSplit> splits;
};

ExperimentData load_data(const ExperimentConfig& config);

/// The target document cut into consecutive full windows of
/// config.sample_tokens tokens.
std::vector<TokenSeq> memorization_samples(const ExperimentData& data,
                                           const ExperimentConfig& config);

struct RecipeOutput {
  std::vector<Artifact> artifacts;
  std::string summary;       // human-readable, printed by the CLI
  bool verified = true;      // false when a verifier reported a failure
};

// Every recipe is a pure function of the config (threads only change speed).
RecipeOutput run_train(const ExperimentConfig& config);
RecipeOutput run_memorization(const ExperimentConfig& config);
RecipeOutput run_strength_sweep(const ExperimentConfig& config);
RecipeOutput run_mia(const ExperimentConfig& config);
RecipeOutput run_adaptive(const ExperimentConfig& config);
RecipeOutput run_bounds(const ExperimentConfig& config);

/// Names accepted by run_recipe.
const std::vector<std::string>& recipe_names();
RecipeOutput run_recipe(const std::string& name, const ExperimentConfig& config);

/// Writes the artifacts plus manifest_<recipe>.json into `dir`.
RunManifest write_run(const std::filesystem::path& dir, const std::string& recipe,
                      const ExperimentConfig& config, const RecipeOutput& output,
                      double wall_clock_seconds);

/// Fixed-format number for CSV cells ("%.10g"; "inf"/"nan" spelled out).
std::string csv_number(double value);

}  // namespace wmaudit
