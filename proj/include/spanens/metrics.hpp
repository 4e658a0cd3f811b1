#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spanens {

/// Lowercase, strip ASCII punctuation, collapse whitespace runs, trim.
std::string normalize_answer(std::string_view text);

bool exact_match(std::string_view prediction, const std::vector<std::string>& references);

/// Last number in the text (optional sign, digits with thousands commas,
/// optional decimal part), commas removed.
std::optional<double> extract_numeric_answer(std::string_view text);

/// Last number of the prediction equals the number in any reference.
bool numeric_match(std::string_view prediction, const std::vector<std::string>& references);

/// Corpus BLEU in [0, 100] over lowercased whitespace tokens: geometric mean
/// of clipped n-gram precisions for n = 1..max_n times the brevity penalty.
/// The reference length per sentence is the closest reference length,
/// shorter on ties. Zero when any n-gram order has no match.
double corpus_bleu(const std::vector<std::string>& hypotheses,
                   const std::vector<std::vector<std::string>>& reference_lists,
                   std::size_t max_n = 4);

}  // namespace spanens
