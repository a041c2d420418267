#include "wmaudit/experiment.hpp"

#include <cstdio>
#include <cstdlib>
#include <stdexcept>

#include <json.hpp>

#include "wmaudit/corpus.hpp"
#include "wmaudit/rng.hpp"

#ifndef WMAUDIT_VERSION
#define WMAUDIT_VERSION "0.0.0"
#endif

namespace wmaudit {

using nlohmann::json;

std::string toolkit_version() { return WMAUDIT_VERSION; }

namespace {

template <typename E, typename ToString>
json enum_list(const std::vector<E>& values, ToString to_str) {
  json out = json::array();
  for (const auto& v : values) out.push_back(to_str(v));
  return out;
}

template <typename E, typename Parse>
std::vector<E> parse_list(const json& j, Parse parse) {
  std::vector<E> out;
  for (const auto& v : j) out.push_back(parse(v.get<std::string>()));
  return out;
}

template <typename T>
void read(const json& j, const char* name, T& field) {
  if (!j.contains(name)) return;
  try {
    field = j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: field '") + name + "': " + e.what());
  }
}

json fixture_json(const FixtureOptions& f) {
  const auto& l = f.language;
  return {{"seed", f.seed},
          {"per_side", f.per_side},
          {"split_words", f.split_words},
          {"target_words", f.target_words},
          {"background_docs", f.background_docs},
          {"background_words", f.background_words},
          {"language",
           {{"lexicon_size", l.lexicon_size},
            {"successors", l.successors},
            {"follow_prob", l.follow_prob},
            {"zipf_exponent", l.zipf_exponent},
            {"proper_noun_rate", l.proper_noun_rate},
            {"comma_rate", l.comma_rate},
            {"min_sentence", l.min_sentence},
            {"max_sentence", l.max_sentence}}}};
}

void read_fixture(const json& j, FixtureOptions& f) {
  read(j, "seed", f.seed);
  read(j, "per_side", f.per_side);
  read(j, "split_words", f.split_words);
  read(j, "target_words", f.target_words);
  read(j, "background_docs", f.background_docs);
  read(j, "background_words", f.background_words);
  if (j.contains("language")) {
    const auto& lj = j.at("language");
    auto& l = f.language;
    read(lj, "lexicon_size", l.lexicon_size);
    read(lj, "successors", l.successors);
    read(lj, "follow_prob", l.follow_prob);
    read(lj, "zipf_exponent", l.zipf_exponent);
    read(lj, "proper_noun_rate", l.proper_noun_rate);
    read(lj, "comma_rate", l.comma_rate);
    read(lj, "min_sentence", l.min_sentence);
    read(lj, "max_sentence", l.max_sentence);
  }
}

json bounds_json(const BoundsParams& b) {
  return {{"m_count", b.m_count},
          {"T_trials", b.T_trials},
          {"n_len", b.n_len},
          {"gamma", b.gamma},
          {"epsilons", b.epsilons},
          {"m_conf", b.m_conf},
          {"delta", b.delta},
          {"theorem2_instances", b.theorem2_instances},
          {"theorem2_max_tokens", b.theorem2_max_tokens},
          {"corollary_n", b.corollary_n},
          {"corollary_m", b.corollary_m},
          {"corollary_T", b.corollary_T},
          {"toy_vocab", b.toy_vocab},
          {"toy_order", b.toy_order},
          {"toy_texts", b.toy_texts},
          {"toy_len", b.toy_len},
          {"mc_trials", b.mc_trials},
          {"tiny_vocab", b.tiny_vocab},
          {"tiny_len", b.tiny_len},
          {"tiny_trials", b.tiny_trials}};
}

void read_bounds(const json& j, BoundsParams& b) {
  read(j, "m_count", b.m_count);
  read(j, "T_trials", b.T_trials);
  read(j, "n_len", b.n_len);
  read(j, "gamma", b.gamma);
  read(j, "epsilons", b.epsilons);
  read(j, "m_conf", b.m_conf);
  read(j, "delta", b.delta);
  read(j, "theorem2_instances", b.theorem2_instances);
  read(j, "theorem2_max_tokens", b.theorem2_max_tokens);
  read(j, "corollary_n", b.corollary_n);
  read(j, "corollary_m", b.corollary_m);
  read(j, "corollary_T", b.corollary_T);
  read(j, "toy_vocab", b.toy_vocab);
  read(j, "toy_order", b.toy_order);
  read(j, "toy_texts", b.toy_texts);
  read(j, "toy_len", b.toy_len);
  read(j, "mc_trials", b.mc_trials);
  read(j, "tiny_vocab", b.tiny_vocab);
  read(j, "tiny_len", b.tiny_len);
  read(j, "tiny_trials", b.tiny_trials);
}

[[noreturn]] void bad(const std::string& what) {
  throw std::invalid_argument("config: " + what);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (order < 0) bad("order must be >= 0");
  if (reference_order < 0) bad("reference_order must be >= 0");
  if (approx_order < 0) bad("approx_order must be >= 0");
  if (!(alpha > 0) || !(reference_alpha > 0)) bad("alpha must be > 0");
  if (schemes.empty()) bad("schemes is empty");
  if (!(gamma > 0 && gamma < 1)) bad("gamma must be in (0,1)");
  for (double g : gammas) {
    if (!(g > 0 && g < 1)) bad("gammas must lie in (0,1)");
  }
  if (!(delta >= 0)) bad("delta must be >= 0");
  for (double d : deltas) {
    if (!(d >= 0)) bad("deltas must be >= 0");
  }
  if (key_count < 1) bad("key_count must be >= 1");
  if (attacks.empty()) bad("attacks is empty");
  if (min_k_grid.empty()) bad("min_k_grid is empty");
  for (double k : min_k_grid) {
    if (!(k > 0 && k <= 100)) bad("min_k_grid entries must be in (0,100]");
  }
  if (prompt_lengths.empty()) bad("prompt_lengths is empty");
  for (std::size_t p : prompt_lengths) {
    if (p >= sample_tokens) bad("prompt lengths must be shorter than sample_tokens");
  }
  if (duplication < 1) bad("duplication must be >= 1");
  for (auto d : duplication_factors) {
    if (d < 1) bad("duplication factors must be >= 1");
  }
  if (sample_tokens < 2) bad("sample_tokens must be >= 2");
  if (prefix_words < 1) bad("prefix_words must be >= 1");
  if (quality_samples < 1 || quality_max_len < 1) bad("quality sizes must be >= 1");
  if (fixture.per_side < 1) bad("fixture.per_side must be >= 1");
}

std::string ExperimentConfig::to_json(bool include_runtime) const {
  json j = {
      {"corpus_path", corpus_path},
      {"dataset_path", dataset_path},
      {"fixture", fixture_json(fixture)},
      {"order", order},
      {"alpha", alpha},
      {"reference_order", reference_order},
      {"reference_alpha", reference_alpha},
      {"approx_order", approx_order},
      {"schemes", enum_list(schemes, [](Scheme s) { return to_string(s); })},
      {"gamma", gamma},
      {"delta", delta},
      {"gammas", gammas},
      {"deltas", deltas},
      {"key_count", key_count},
      {"mode", to_string(mode)},
      {"attacks", enum_list(attacks, [](Attack a) { return to_string(a); })},
      {"sweep_attacks", enum_list(sweep_attacks, [](Attack a) { return to_string(a); })},
      {"reference_variants",
       enum_list(reference_variants, [](ReferenceVariant v) { return to_string(v); })},
      {"reference_delta_ratio", reference_delta_ratio},
      {"min_k_grid", min_k_grid},
      {"prompt_lengths", prompt_lengths},
      {"target_index", target_index},
      {"duplication", duplication},
      {"duplication_factors", duplication_factors},
      {"sample_tokens", sample_tokens},
      {"prefix_words", prefix_words},
      {"quality_samples", quality_samples},
      {"quality_max_len", quality_max_len},
      {"bounds", bounds_json(bounds)},
      {"master_seed", master_seed},
  };
  if (include_runtime) {
    j["threads"] = threads;
    j["output_dir"] = output_dir;
  }
  return j.dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  read(j, "corpus_path", c.corpus_path);
  read(j, "dataset_path", c.dataset_path);
  if (j.contains("fixture")) read_fixture(j.at("fixture"), c.fixture);
  read(j, "order", c.order);
  read(j, "alpha", c.alpha);
  read(j, "reference_order", c.reference_order);
  read(j, "reference_alpha", c.reference_alpha);
  read(j, "approx_order", c.approx_order);
  if (j.contains("schemes")) c.schemes = parse_list<Scheme>(j.at("schemes"), parse_scheme);
  read(j, "gamma", c.gamma);
  read(j, "delta", c.delta);
  read(j, "gammas", c.gammas);
  read(j, "deltas", c.deltas);
  read(j, "key_count", c.key_count);
  if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
  if (j.contains("attacks")) c.attacks = parse_list<Attack>(j.at("attacks"), parse_attack);
  if (j.contains("sweep_attacks")) {
    c.sweep_attacks = parse_list<Attack>(j.at("sweep_attacks"), parse_attack);
  }
  if (j.contains("reference_variants")) {
    c.reference_variants =
        parse_list<ReferenceVariant>(j.at("reference_variants"), parse_reference_variant);
  }
  read(j, "reference_delta_ratio", c.reference_delta_ratio);
  read(j, "min_k_grid", c.min_k_grid);
  read(j, "prompt_lengths", c.prompt_lengths);
  read(j, "target_index", c.target_index);
  read(j, "duplication", c.duplication);
  read(j, "duplication_factors", c.duplication_factors);
  read(j, "sample_tokens", c.sample_tokens);
  read(j, "prefix_words", c.prefix_words);
  read(j, "quality_samples", c.quality_samples);
  read(j, "quality_max_len", c.quality_max_len);
  if (j.contains("bounds")) read_bounds(j.at("bounds"), c.bounds);
  read(j, "output_dir", c.output_dir);
  read(j, "master_seed", c.master_seed);
  read(j, "threads", c.threads);
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return from_json(read_file(path));
}

std::string ExperimentConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_json(false))));
  return buf;
}

std::vector<std::uint64_t> ExperimentConfig::keys() const {
  std::vector<std::uint64_t> out;
  for (std::size_t k = 0; k < key_count; ++k) out.push_back(derive_seed(master_seed, "wm-key", k));
  return out;
}

std::filesystem::path ExperimentConfig::resolved_output_dir() const {
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') return env;
  return output_dir;
}

std::string RunManifest::to_json() const {
  json ks = json::array();
  for (auto k : keys) ks.push_back(key_to_hex(k));
  const json j = {{"recipe", recipe},
                  {"config_hash", config_hash},
                  {"version", version},
                  {"artifacts", artifacts},
                  {"master_seed", master_seed},
                  {"keys", ks},
                  {"wall_clock_seconds", wall_clock_seconds}};
  return j.dump(2) + "\n";
}

}  // namespace wmaudit
