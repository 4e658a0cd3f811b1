#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spanens {

/// Raised by a backend for transport failures, timeouts, malformed responses
/// or continuations it cannot score.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedScoringError : public BackendError {
 public:
  using BackendError::BackendError;
};

struct TokenScore {
  std::string token_text;
  double logprob = 0.0;  // natural log
};

/// One model's proposed continuation of the shared prefix.
struct SpanCandidate {
  std::size_t producer_index = 0;
  std::string text;
  std::size_t word_count = 0;
  bool finished = false;  // end-of-sequence was emitted within the span

  bool operator==(const SpanCandidate&) const = default;
};

/// Uniform contract for ensemble members. Implementations must be safe to
/// call concurrently from several threads.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual const std::string& name() const = 0;
  virtual bool supports_scoring() const = 0;

  /// Greedy continuation of `prefix`, cut at `span_words` whole words or at
  /// end-of-sequence. producer_index is left at 0 for the caller to set.
  virtual SpanCandidate generate_span(std::string_view prefix, std::size_t span_words) const = 0;

  /// Per-token log-probabilities of `continuation` given `prefix` under this
  /// model's own tokenization. Token texts concatenate to `continuation`.
  virtual std::vector<TokenScore> score(std::string_view prefix,
                                        std::string_view continuation) const = 0;
};

}  // namespace spanens
