#pragma once

// Twenty hypothesis/reference sets. kCorpusBleu was computed with sacrebleu
// 2.6.0 (tokenize="none", lowercase=True, no smoothing) and agrees with
// nltk corpus_bleu to 1e-12.

#include <string>
#include <vector>

namespace bleu_corpus {

inline const std::vector<std::string> kHypotheses = {
    "the cat is on the mat",
    "there is a cat on the mat",
    "a quick brown fox jumps over the lazy dog",
    "he reads the book in the garden every morning",
    "the weather is nice today",
    "we will meet at the station at noon",
    "She Sells Sea Shells by the sea shore",
    "the results of the experiment were surprising",
    "I would like a cup of coffee please",
    "the train arrives late in the evening",
    "they built a small house near the river",
    "my brother plays the guitar very well",
    "the children are playing in the park",
    "please close the door when you leave",
    "the meeting has been moved to friday",
    "it rained heavily during the night",
    "the museum opens at nine in the morning",
    "our team won the match last week",
    "the old man walked slowly along the road",
    "this book is about the history of rome",
};

inline const std::vector<std::vector<std::string>> kReferences = {
    {"the cat sat on the mat", "there is a cat on the mat"},
    {"there is a cat on the mat"},
    {"the quick brown fox jumps over the lazy dog"},
    {"every morning he reads a book in the garden"},
    {"today the weather is nice", "the weather is good today"},
    {"we will meet at the station at twelve"},
    {"she sells sea shells on the sea shore"},
    {"the experiment gave surprising results"},
    {"i would like a coffee please", "a cup of coffee please"},
    {"the train arrives late at night"},
    {"they built a little house close to the river"},
    {"my brother plays guitar very well"},
    {"the kids are playing in the park"},
    {"close the door when you leave please"},
    {"the meeting was moved to friday"},
    {"it rained hard during the night"},
    {"the museum opens at nine am"},
    {"our team won the game last week"},
    {"the old man walked slowly down the road"},
    {"this book is about the history of ancient rome"},
};

inline constexpr double kCorpusBleu = 58.751374425468775;
// first five sentences, first reference only
inline constexpr double kFirstFiveBleu = 69.15845029492493;

}  // namespace bleu_corpus
