#pragma once

/**
 * Span-level ensemble decoding.
 *
 * Each round every pool member proposes a span of the same word length from
 * the shared prefix, every member scores every span by perplexity, and the
 * span with the lowest mean perplexity over its kept scorers wins. A span's
 * highest and lowest scores are dropped when max/min exceeds lambda, which
 * stops one unreliable scorer from sinking a good span or promoting its own.
 *
 * Aggregation is sequential and indexed by model position, so results never
 * depend on the completion order of the concurrent backend calls.
 */

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "spanens/backend.hpp"
#include "spanens/pool.hpp"

namespace spanens {

class ScoringError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A span without a single valid score cannot take part in selection.
class UnscorableSpanError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NoEligibleSpanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A round produced nothing usable: every generation failed, or no non-empty
/// span received a valid score.
class RoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EnsembleConfig {
  std::size_t span_length_words = 4;
  // Zero is accepted: every span with unequal scores then gets filtered.
  double lambda = 10.0;
  bool filter_enabled = true;
  std::size_t max_total_words = 256;
  std::size_t max_retries = 0;
  // Concurrent backend calls per phase; 0 means one per pool member.
  std::size_t workers = 0;

  /// Throws std::invalid_argument on a violated invariant.
  void validate() const;
};

/// N x N perplexities; entry (scorer i, span j). Missing entries are INVALID.
class ScoreMatrix {
 public:
  ScoreMatrix() = default;
  explicit ScoreMatrix(std::size_t n_models);

  std::size_t size() const { return n_; }
  const std::optional<double>& at(std::size_t scorer, std::size_t span) const;
  bool valid(std::size_t scorer, std::size_t span) const { return at(scorer, span).has_value(); }

  /// Rejects values that are not finite and positive.
  void set(std::size_t scorer, std::size_t span, double ppl);
  void invalidate(std::size_t scorer, std::size_t span);

  /// Valid (scorer, ppl) pairs for one span, in scorer order.
  std::vector<std::pair<std::size_t, double>> column(std::size_t span) const;

  bool operator==(const ScoreMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::optional<double>> cells_;
};

struct FilterResult {
  std::size_t span_index = 0;
  std::vector<std::size_t> removed;
  std::vector<std::size_t> kept;
  bool triggered = false;

  bool operator==(const FilterResult&) const = default;
};

struct RoundTimings {
  double generate_ms = 0.0;
  double score_ms = 0.0;
  double select_ms = 0.0;
};

struct RoundResult {
  std::vector<std::optional<SpanCandidate>> candidates;  // nullopt: generation failed
  ScoreMatrix matrix;
  std::vector<FilterResult> filters;
  std::optional<std::size_t> winner_index;  // nullopt: no eligible span
  std::optional<double> winner_mean_ppl;
  RoundTimings timings;
};

enum class StopReason { eos, word_budget, all_empty };

const char* to_string(StopReason reason);

struct Transcript {
  std::string prompt;
  std::vector<RoundResult> rounds;
  std::string final_text;
  StopReason stop_reason = StopReason::eos;
};

struct Selection {
  std::size_t winner_index = 0;
  double mean_ppl = 0.0;
};

/// exp(-mean(logprobs)). An empty list means an empty span and yields
/// nullopt; a non-finite entry throws ScoringError.
std::optional<double> compute_perplexity(std::span<const double> token_logprobs);
std::optional<double> compute_perplexity(std::span<const TokenScore> token_scores);

/// Outlier filter for one span's valid scores. Triggers when max/min > lambda
/// (strict) and then removes the first-index argmax and argmin scorers. With
/// only two valid scores, or all scores equal, nothing is removed.
FilterResult filter_scores(std::size_t span_index,
                           std::span<const std::pair<std::size_t, double>> column, double lambda);

/// FilterResult that keeps every valid scorer (filtering disabled).
FilterResult keep_all(std::size_t span_index,
                      std::span<const std::pair<std::size_t, double>> column);

/// Argmin over eligible spans of the mean kept perplexity, lowest index on
/// ties. Absent or empty candidates and spans with no kept scorer are
/// ineligible. Throws NoEligibleSpanError when nothing qualifies.
Selection select_span(const ScoreMatrix& matrix, std::span<const FilterResult> filters,
                      std::span<const std::optional<SpanCandidate>> candidates);

/// One generate / cross-score / filter / select round.
RoundResult ensemble_round(const EnsemblePool& pool, const std::string& prefix,
                           const EnsembleConfig& config);

/// Repeats rounds, appending each winner to the prefix, until a winning span
/// ends the sequence, the word budget is spent, or every span is empty.
Transcript generate(const EnsemblePool& pool, const std::string& prompt,
                    const EnsembleConfig& config);

}  // namespace spanens
