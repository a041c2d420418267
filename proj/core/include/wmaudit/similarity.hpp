#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wmaudit/vocab.hpp"

namespace wmaudit {

/// Token-level Levenshtein distance (unit insert/delete/substitute costs).
std::size_t levenshtein(std::span<const TokenId> a, std::span<const TokenId> b);

/// 1 - levenshtein(a, b) / max(|a|, |b|); two empty sequences score 1.
double edit_similarity(std::span<const TokenId> a, std::span<const TokenId> b);

enum class BleuLevel { word, token };

/// Sentence BLEU with add-one smoothing of the n >= 2 precisions:
///   p_1 = m_1 / c_1,  p_n = (m_n + 1) / (c_n + 1) for n >= 2
///   BLEU = BP * exp(mean_n ln p_n),  BP = exp(1 - r/c) when c < r.
/// m_n is the clipped n-gram match count, c_n the candidate n-gram count.
double bleu(std::span<const std::string> candidate, std::span<const std::string> reference,
            int max_n = 4);

/// BLEU over token sequences. Token level compares token strings; word
/// level re-attaches punctuation via Vocabulary::decode and splits the
/// result on whitespace.
double bleu(std::span<const TokenId> candidate, std::span<const TokenId> reference,
            const Vocabulary& vocab, BleuLevel level, int max_n = 4);

/// Whitespace-delimited words of `text`.
std::vector<std::string> split_words(std::string_view text);

}  // namespace wmaudit
