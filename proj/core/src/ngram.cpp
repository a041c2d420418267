#include "wmaudit/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "wmaudit/rng.hpp"

namespace wmaudit {

std::uint64_t ContextCounts::count(TokenId token) const noexcept {
  const auto it = std::lower_bound(next.begin(), next.end(), token,
                                   [](const auto& e, TokenId t) { return e.first < t; });
  return (it != next.end() && it->first == token) ? it->second : 0;
}

ContextDistribution::ContextDistribution(const ContextCounts* counts, double alpha,
                                         std::size_t vocab_size) noexcept
    : counts_(counts),
      alpha_(alpha),
      vocab_size_(vocab_size),
      denom_((counts ? static_cast<double>(counts->total) : 0.0) +
             alpha * static_cast<double>(vocab_size)) {}

double ContextDistribution::prob(TokenId token) const noexcept {
  const double c = counts_ ? static_cast<double>(counts_->count(token)) : 0.0;
  return (c + alpha_) / denom_;
}

double ContextDistribution::logprob(TokenId token) const noexcept {
  return std::log(prob(token));
}

std::span<const std::pair<TokenId, std::uint64_t>> ContextDistribution::successors()
    const noexcept {
  if (!counts_) return {};
  return counts_->next;
}

std::size_t NGramModel::KeyHash::operator()(const std::vector<TokenId>& key) const noexcept {
  std::uint64_t h = 0x84222325cbf29ce4ULL ^ key.size();
  for (const TokenId t : key) h = mix64(h ^ static_cast<std::uint32_t>(t));
  return static_cast<std::size_t>(h);
}

NGramModel::NGramModel(std::shared_ptr<const Vocabulary> vocab, int order, double alpha)
    : NGramModel(std::move(vocab), order, alpha, Table{}) {}

NGramModel::NGramModel(std::shared_ptr<const Vocabulary> vocab, int order, double alpha,
                       Table table)
    : vocab_(std::move(vocab)), order_(order), alpha_(alpha), table_(std::move(table)) {
  if (!vocab_) throw std::invalid_argument("ngram: null vocabulary");
  if (order_ < 0) throw std::invalid_argument("ngram: order must be >= 0");
  if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) {
    throw std::invalid_argument("ngram: alpha must be a positive finite number");
  }
}

NGramModel NGramModel::train(std::shared_ptr<const Vocabulary> vocab,
                             std::span<const std::vector<TokenId>> docs, int order,
                             double alpha, std::optional<Duplication> duplication) {
  if (duplication) {
    if (duplication->doc_index >= docs.size()) {
      throw std::out_of_range("train_ngram: duplication index " +
                              std::to_string(duplication->doc_index) + " out of range");
    }
    if (duplication->factor < 1) throw std::invalid_argument("train_ngram: factor must be >= 1");
  }
  if (!vocab) throw std::invalid_argument("ngram: null vocabulary");
  const auto vocab_size = static_cast<TokenId>(vocab->size());

  // Accumulate in a hash of hashes, then freeze into sorted successor lists.
  std::unordered_map<std::vector<TokenId>, std::unordered_map<TokenId, std::uint64_t>, KeyHash>
      raw;
  std::vector<TokenId> key;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const std::uint64_t weight =
        (duplication && duplication->doc_index == d) ? duplication->factor : 1;
    const auto& doc = docs[d];
    for (std::size_t i = 0; i < doc.size(); ++i) {
      if (doc[i] < 0 || doc[i] >= vocab_size) {
        throw std::out_of_range("train_ngram: token id outside the vocabulary");
      }
      const std::size_t max_len = std::min<std::size_t>(i, static_cast<std::size_t>(order));
      for (std::size_t len = 0; len <= max_len; ++len) {
        key.assign(doc.begin() + static_cast<std::ptrdiff_t>(i - len),
                   doc.begin() + static_cast<std::ptrdiff_t>(i));
        raw[key][doc[i]] += weight;
      }
    }
  }

  Table table;
  table.reserve(raw.size());
  for (auto& [ctx, succ] : raw) {
    ContextCounts cc;
    cc.next.assign(succ.begin(), succ.end());
    std::sort(cc.next.begin(), cc.next.end());
    for (const auto& [tok, c] : cc.next) cc.total += c;
    table.emplace(ctx, std::move(cc));
  }
  return NGramModel(std::move(vocab), order, alpha, std::move(table));
}

const ContextCounts* NGramModel::lookup(std::span<const TokenId> context) const {
  const std::size_t max_len = std::min<std::size_t>(context.size(), static_cast<std::size_t>(order_));
  std::vector<TokenId> key;
  for (std::size_t len = max_len + 1; len-- > 0;) {
    key.assign(context.end() - static_cast<std::ptrdiff_t>(len), context.end());
    const auto it = table_.find(key);
    if (it != table_.end() && it->second.total > 0) return &it->second;
  }
  return nullptr;
}

ContextDistribution NGramModel::distribution(std::span<const TokenId> context) const {
  return ContextDistribution(lookup(context), alpha_, vocab_->size());
}

double NGramModel::prob(std::span<const TokenId> context, TokenId token) const {
  return distribution(context).prob(token);
}

NextTokenLogits NGramModel::next_token_logits(std::span<const TokenId> context) const {
  const auto dist = distribution(context);
  const double base = std::log(dist.alpha() / dist.denominator());
  NextTokenLogits out{std::vector<double>(vocab_->size(), base)};
  for (const auto& [tok, c] : dist.successors()) {
    out.logits[static_cast<std::size_t>(tok)] =
        std::log((static_cast<double>(c) + dist.alpha()) / dist.denominator());
  }
  return out;
}

double NGramModel::token_logprob(std::span<const TokenId> context, TokenId token) const {
  return distribution(context).logprob(token);
}

std::string NGramModel::to_json() const {
  using nlohmann::json;
  std::map<std::vector<TokenId>, const ContextCounts*> ordered;
  for (const auto& [ctx, cc] : table_) ordered.emplace(ctx, &cc);
  json counts = json::array();
  for (const auto& [ctx, cc] : ordered) {
    json next = json::array();
    for (const auto& [tok, c] : cc->next) next.push_back({tok, c});
    counts.push_back({{"context", ctx}, {"next", std::move(next)}});
  }
  json doc = {{"format", "wmaudit-ngram-v1"},
              {"order", order_},
              {"alpha", alpha_},
              {"unk", vocab_->token(vocab_->unk_id())},
              {"vocab", vocab_->tokens()},
              {"counts", std::move(counts)}};
  return doc.dump() + "\n";
}

NGramModel NGramModel::from_json(const std::string& text) {
  using nlohmann::json;
  const json doc = json::parse(text);
  if (doc.value("format", std::string{}) != "wmaudit-ngram-v1") {
    throw std::invalid_argument("model file: unsupported format");
  }
  auto vocab = std::make_shared<const Vocabulary>(doc.at("vocab").get<std::vector<std::string>>(),
                                                  doc.value("unk", std::string(kUnkToken)));
  Table table;
  for (const auto& entry : doc.at("counts")) {
    ContextCounts cc;
    for (const auto& pair : entry.at("next")) {
      cc.next.emplace_back(pair.at(0).get<TokenId>(), pair.at(1).get<std::uint64_t>());
      cc.total += cc.next.back().second;
    }
    std::sort(cc.next.begin(), cc.next.end());
    table.emplace(entry.at("context").get<std::vector<TokenId>>(), std::move(cc));
  }
  return NGramModel(std::move(vocab), doc.at("order").get<int>(), doc.at("alpha").get<double>(),
                    std::move(table));
}

NGramModel train_ngram(std::shared_ptr<const Vocabulary> vocab,
                       std::span<const std::string> corpus, int order, double alpha,
                       std::optional<Duplication> duplication) {
  if (!vocab) throw std::invalid_argument("ngram: null vocabulary");
  std::vector<std::vector<TokenId>> docs;
  docs.reserve(corpus.size());
  for (const auto& text : corpus) docs.push_back(vocab->encode(text).ids);
  return NGramModel::train(std::move(vocab), docs, order, alpha, duplication);
}

}  // namespace wmaudit
