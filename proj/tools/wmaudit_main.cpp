// wmaudit command-line front end.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 precondition or
// hypothesis violation, 3 verifier failure.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wmaudit/corpus.hpp"
#include "wmaudit/experiment.hpp"
#include "wmaudit/lm.hpp"
#include "wmaudit/ngram.hpp"
#include "wmaudit/recipes.hpp"
#include "wmaudit/theory.hpp"
#include "wmaudit/watermark.hpp"

namespace {

using namespace wmaudit;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitPrecondition = 2;
constexpr int kExitVerifier = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Overrides {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> corpus;
  std::optional<std::string> dataset;
  std::optional<int> order;
  std::optional<double> alpha;
  std::vector<std::string> schemes;
  std::optional<double> gamma;
  std::optional<double> delta;
  std::vector<double> gammas;
  std::vector<double> deltas;
  std::optional<std::size_t> keys;
  std::optional<std::string> mode;
  std::optional<std::size_t> per_side;
  std::vector<std::size_t> prompt_lengths;
  std::optional<std::uint64_t> duplication;
};

void add_common(CLI::App& app, Overrides& o) {
  app.add_option("-c,--config", o.config_path, "Experiment config (JSON)");
  app.add_option("-o,--out", o.out_dir, "Output directory");
  app.add_option("-j,--threads", o.threads, "Worker threads");
  app.add_option("--seed", o.seed, "Master seed");
  app.add_option("--corpus", o.corpus, "Training corpus (.txt one doc per line, or .jsonl)");
  app.add_option("--dataset", o.dataset, "Labeled dataset (.jsonl with text/label)");
  app.add_option("--order", o.order, "n-gram context length");
  app.add_option("--alpha", o.alpha, "Additive smoothing constant");
  app.add_option("--schemes", o.schemes, "Watermark schemes (umd, unigram)");
  app.add_option("--gamma", o.gamma, "Green fraction");
  app.add_option("--delta", o.delta, "Watermark strength");
  app.add_option("--gammas", o.gammas, "Green fractions for the gamma sweep");
  app.add_option("--deltas", o.deltas, "Strength grid");
  app.add_option("--keys", o.keys, "Number of watermark keys");
  app.add_option("--mode", o.mode, "soft or hard");
  app.add_option("--per-side", o.per_side, "Fixture samples per label and split");
  app.add_option("--prompt-lengths", o.prompt_lengths, "Prompt lengths");
  app.add_option("--duplication", o.duplication, "Duplication factor of the target document");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c;
  try {
    if (!o.config_path.empty()) c = ExperimentConfig::load(o.config_path);
    if (o.out_dir) c.output_dir = *o.out_dir;
    if (o.threads) c.threads = *o.threads;
    if (o.seed) c.master_seed = *o.seed;
    if (o.corpus) c.corpus_path = *o.corpus;
    if (o.dataset) c.dataset_path = *o.dataset;
    if (o.order) c.order = *o.order;
    if (o.alpha) c.alpha = *o.alpha;
    if (!o.schemes.empty()) {
      c.schemes.clear();
      for (const auto& s : o.schemes) c.schemes.push_back(parse_scheme(s));
    }
    if (o.gamma) c.gamma = *o.gamma;
    if (o.delta) c.delta = *o.delta;
    if (!o.gammas.empty()) c.gammas = o.gammas;
    if (!o.deltas.empty()) c.deltas = o.deltas;
    if (o.keys) c.key_count = *o.keys;
    if (o.mode) c.mode = parse_mode(*o.mode);
    if (o.per_side) c.fixture.per_side = *o.per_side;
    if (!o.prompt_lengths.empty()) c.prompt_lengths = o.prompt_lengths;
    if (o.duplication) c.duplication = *o.duplication;
    c.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  return c;
}

int run_recipe_cmd(const std::string& name, const ExperimentConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  const RecipeOutput out = run_recipe(name, c);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto dir = c.resolved_output_dir();
  const RunManifest m = write_run(dir, name, c, out, secs);
  std::cout << out.summary;
  std::cout << "wrote " << m.artifacts.size() << " artifacts to " << dir.string()
            << " (config " << m.config_hash << ")\n";
  return out.verified ? kExitOk : kExitVerifier;
}

struct WatermarkFlags {
  std::optional<std::string> key;
  std::string scheme = "umd";
  double gamma = 0.5;
  double delta = 10.0;
  std::string mode = "soft";
};

void add_watermark_flags(CLI::App& app, WatermarkFlags& w, bool key_required) {
  auto* key = app.add_option("--key", w.key, "Watermark key (hex)");
  if (key_required) key->required();
  app.add_option("--scheme", w.scheme, "umd or unigram");
  app.add_option("--gamma", w.gamma, "Green fraction");
  app.add_option("--delta", w.delta, "Watermark strength");
  app.add_option("--mode", w.mode, "soft or hard");
}

WatermarkConfig to_config(const WatermarkFlags& w) {
  try {
    return WatermarkConfig{parse_scheme(w.scheme), w.gamma, w.delta,
                           w.key ? key_from_hex(*w.key) : 0, parse_mode(w.mode)};
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

std::shared_ptr<const NGramModel> load_model(const std::string& path) {
  return std::make_shared<const NGramModel>(NGramModel::from_json(read_file(path)));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Watermark and copyright-audit toolkit over n-gram language models"};
  app.set_version_flag("--version", toolkit_version());
  app.require_subcommand(1);

  Overrides o;
  std::vector<std::pair<std::string, CLI::App*>> recipes;
  const std::vector<std::pair<std::string, std::string>> recipe_help{
      {"train", "Train and serialize the model and its duplication variants"},
      {"memorization", "Relative perplexity increase per scheme and prompt length"},
      {"strength-sweep", "Strength sweep with the generation-quality baseline"},
      {"mia", "Membership-inference AUCs, gamma sweep and reference variants"},
      {"adaptive", "Plain versus adaptive Min-K% per split and key"},
  };
  for (const auto& [name, help] : recipe_help) {
    auto* sub = app.add_subcommand(name, help);
    add_common(*sub, o);
    recipes.emplace_back(name, sub);
  }

  auto* config_cmd = app.add_subcommand("config", "Print the resolved experiment config");
  add_common(*config_cmd, o);

  auto* bounds = app.add_subcommand("bounds", "Closed-form bounds and their verifiers");
  add_common(*bounds, o);
  std::optional<double> b_m, b_T, b_n, b_gamma, b_mconf, b_delta;
  std::vector<double> b_eps;
  std::optional<std::uint64_t> b_trials;
  std::optional<std::size_t> b_instances;
  bounds->add_option("--m", b_m, "Number of protected texts");
  bounds->add_option("--T", b_T, "Generation attempts");
  bounds->add_option("--n", b_n, "Tokens per text");
  bounds->add_option("--bound-gamma", b_gamma, "Green fraction for the hard-watermark bound");
  bounds->add_option("--eps", b_eps, "Confidence margins epsilon");
  bounds->add_option("--m-conf", b_mconf, "Lower bound on x / a_i");
  bounds->add_option("--bound-delta", b_delta, "Fixed delta for the soft-watermark check (0: auto)");
  bounds->add_option("--trials", b_trials, "Monte Carlo trials");
  bounds->add_option("--instances", b_instances, "Random soft-watermark instances");

  auto* generate_cmd = app.add_subcommand("generate", "Generate from a saved model");
  std::string g_model;
  std::string g_prompt;
  std::size_t g_len = 20;
  std::string g_decode = "greedy";
  std::uint64_t g_seed = 0;
  WatermarkFlags g_wm;
  generate_cmd->add_option("--model", g_model, "model.json")->required();
  generate_cmd->add_option("--prompt", g_prompt, "Prompt text");
  generate_cmd->add_option("--max-len", g_len, "Tokens to generate");
  generate_cmd->add_option("--decode", g_decode, "greedy or multinomial");
  generate_cmd->add_option("--seed", g_seed, "Sampling seed");
  add_watermark_flags(*generate_cmd, g_wm, false);

  auto* detect_cmd = app.add_subcommand("detect", "Green-fraction z-score of a text");
  std::string d_model;
  std::string d_text;
  std::string d_file;
  std::size_t d_prompt = 0;
  WatermarkFlags d_wm;
  detect_cmd->add_option("--model", d_model, "model.json (for the vocabulary)")->required();
  detect_cmd->add_option("--text", d_text, "Text to score");
  detect_cmd->add_option("--file", d_file, "Read the text from a file");
  detect_cmd->add_option("--prompt-len", d_prompt, "Leading tokens to skip");
  add_watermark_flags(*detect_cmd, d_wm, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    for (const auto& [name, sub] : recipes) {
      if (sub->parsed()) return run_recipe_cmd(name, resolve(o));
    }
    if (config_cmd->parsed()) {
      const auto c = resolve(o);
      std::cout << c.to_json(true);
      return kExitOk;
    }
    if (bounds->parsed()) {
      auto c = resolve(o);
      if (b_m) c.bounds.m_count = *b_m;
      if (b_T) c.bounds.T_trials = *b_T;
      if (b_n) c.bounds.n_len = *b_n;
      if (b_gamma) c.bounds.gamma = *b_gamma;
      if (!b_eps.empty()) c.bounds.epsilons = b_eps;
      if (b_mconf) c.bounds.m_conf = *b_mconf;
      if (b_delta) c.bounds.delta = *b_delta;
      if (b_trials) c.bounds.mc_trials = *b_trials;
      if (b_instances) c.bounds.theorem2_instances = *b_instances;
      return run_recipe_cmd("bounds", c);
    }
    if (generate_cmd->parsed()) {
      const auto model = load_model(g_model);
      DecodeMode mode = DecodeMode::greedy;
      if (g_decode == "multinomial") {
        mode = DecodeMode::multinomial;
      } else if (g_decode != "greedy") {
        throw UsageError("unknown decode mode: " + g_decode);
      }
      const TokenSeq prompt = model->vocabulary().encode(g_prompt);
      std::vector<TokenId> out;
      if (g_wm.key) {
        const auto cfg = to_config(g_wm);
        cfg.validate(model->vocab_size());
        const WatermarkedModel wm(model, cfg);
        out = generate(wm, prompt.ids, g_len, mode, g_seed);
      } else {
        out = generate(*model, prompt.ids, g_len, mode, g_seed);
      }
      std::cout << model->vocabulary().decode(out) << "\n";
      return kExitOk;
    }
    if (detect_cmd->parsed()) {
      const auto model = load_model(d_model);
      const std::string text = d_file.empty() ? d_text : read_file(d_file);
      const TokenSeq seq = model->vocabulary().encode(text);
      if (seq.size() <= d_prompt) throw std::invalid_argument("detect: no tokens to score");
      const auto cfg = to_config(d_wm);
      const double z = green_fraction_zscore(seq.ids, cfg, model->vocab_size(), d_prompt);
      std::printf("tokens=%zu z=%.6f\n", seq.size() - d_prompt, z);
      return kExitOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const HypothesisError& e) {
    std::cerr << "hypothesis violated: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const std::logic_error& e) {
    std::cerr << "precondition violated: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
