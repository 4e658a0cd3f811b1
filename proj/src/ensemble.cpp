#include "spanens/ensemble.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "spanens/parallel.hpp"
#include "spanens/segmentation.hpp"

namespace spanens {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

bool candidate_is_consistent(const SpanCandidate& c, std::size_t span_words) {
  if (c.word_count != count_words(c.text)) return false;
  if (c.word_count > span_words) return false;
  if (!c.finished && c.word_count != span_words) return false;
  return truncate_to_words(c.text, span_words).text == c.text;
}

}  // namespace

void EnsembleConfig::validate() const {
  if (span_length_words < 1) throw std::invalid_argument("span length must be at least 1 word");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("lambda must be a finite non-negative number");
  }
  if (max_total_words < span_length_words) {
    throw std::invalid_argument("max_total_words must be >= span length");
  }
}

const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::eos: return "eos";
    case StopReason::word_budget: return "word_budget";
    case StopReason::all_empty: return "all_empty";
  }
  return "unknown";
}

ScoreMatrix::ScoreMatrix(std::size_t n_models) : n_(n_models), cells_(n_models * n_models) {}

const std::optional<double>& ScoreMatrix::at(std::size_t scorer, std::size_t span) const {
  if (scorer >= n_ || span >= n_) throw std::out_of_range("ScoreMatrix index out of range");
  return cells_[scorer * n_ + span];
}

void ScoreMatrix::set(std::size_t scorer, std::size_t span, double ppl) {
  if (scorer >= n_ || span >= n_) throw std::out_of_range("ScoreMatrix index out of range");
  if (!std::isfinite(ppl) || ppl <= 0.0) throw ScoringError("perplexity must be finite and positive");
  cells_[scorer * n_ + span] = ppl;
}

void ScoreMatrix::invalidate(std::size_t scorer, std::size_t span) {
  if (scorer >= n_ || span >= n_) throw std::out_of_range("ScoreMatrix index out of range");
  cells_[scorer * n_ + span].reset();
}

std::vector<std::pair<std::size_t, double>> ScoreMatrix::column(std::size_t span) const {
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t i = 0; i < n_; ++i) {
    if (const auto& v = at(i, span)) out.emplace_back(i, *v);
  }
  return out;
}

std::optional<double> compute_perplexity(std::span<const double> token_logprobs) {
  if (token_logprobs.empty()) return std::nullopt;
  double sum = 0.0;
  for (double lp : token_logprobs) {
    if (!std::isfinite(lp)) throw ScoringError("non-finite token log-probability");
    sum += lp;
  }
  const double ppl = std::exp(-sum / static_cast<double>(token_logprobs.size()));
  if (!std::isfinite(ppl) || ppl <= 0.0) throw ScoringError("perplexity overflow");
  return ppl;
}

std::optional<double> compute_perplexity(std::span<const TokenScore> token_scores) {
  std::vector<double> lps;
  lps.reserve(token_scores.size());
  for (const auto& t : token_scores) lps.push_back(t.logprob);
  return compute_perplexity(std::span<const double>(lps));
}

FilterResult keep_all(std::size_t span_index,
                      std::span<const std::pair<std::size_t, double>> column) {
  FilterResult r;
  r.span_index = span_index;
  for (const auto& [scorer, ppl] : column) r.kept.push_back(scorer);
  return r;
}

FilterResult filter_scores(std::size_t span_index,
                           std::span<const std::pair<std::size_t, double>> column, double lambda) {
  if (column.empty()) {
    throw UnscorableSpanError("span " + std::to_string(span_index) + " has no valid score");
  }
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");

  std::size_t arg_max = 0;
  std::size_t arg_min = 0;
  for (std::size_t k = 1; k < column.size(); ++k) {
    if (column[k].second > column[arg_max].second) arg_max = k;
    if (column[k].second < column[arg_min].second) arg_min = k;
  }
  const double hi = column[arg_max].second;
  const double lo = column[arg_min].second;

  FilterResult r = keep_all(span_index, column);
  // All-equal scores have no outlier to drop, whatever lambda is.
  r.triggered = hi != lo && hi / lo > lambda;
  // Two scorers: dropping both would leave nothing to average.
  if (!r.triggered || column.size() < 3) return r;

  r.kept.clear();
  for (std::size_t k = 0; k < column.size(); ++k) {
    if (k == arg_max || k == arg_min) {
      r.removed.push_back(column[k].first);
    } else {
      r.kept.push_back(column[k].first);
    }
  }
  return r;
}

Selection select_span(const ScoreMatrix& matrix, std::span<const FilterResult> filters,
                      std::span<const std::optional<SpanCandidate>> candidates) {
  const std::size_t n = matrix.size();
  if (filters.size() != n || candidates.size() != n) {
    throw std::invalid_argument("select_span: matrix, filters and candidates disagree on N");
  }

  std::optional<Selection> best;
  for (std::size_t j = 0; j < n; ++j) {
    if (filters[j].span_index != j) throw std::invalid_argument("select_span: filters out of order");
    const auto& cand = candidates[j];
    if (!cand || cand->word_count == 0 || filters[j].kept.empty()) continue;

    double sum = 0.0;
    for (std::size_t scorer : filters[j].kept) {
      const auto& v = matrix.at(scorer, j);
      if (!v) throw std::invalid_argument("select_span: kept scorer has no valid score");
      sum += *v;
    }
    const double mean = sum / static_cast<double>(filters[j].kept.size());
    if (!best || mean < best->mean_ppl) best = Selection{j, mean};
  }
  if (!best) throw NoEligibleSpanError("no candidate span has a valid score");
  return *best;
}

RoundResult ensemble_round(const EnsemblePool& pool, const std::string& prefix,
                           const EnsembleConfig& config) {
  config.validate();
  const std::size_t n = pool.size();
  if (n == 0) throw std::invalid_argument("ensemble_round: empty pool");
  if (prefix.empty()) throw std::invalid_argument("ensemble_round: empty prefix");
  const std::size_t workers = config.workers == 0 ? n : config.workers;

  RoundResult round;
  round.candidates.resize(n);
  round.matrix = ScoreMatrix(n);

  auto t0 = Clock::now();
  parallel_for(n, workers, [&](std::size_t j) {
    try {
      SpanCandidate c = pool.at(j).generate_span(prefix, config.span_length_words);
      c.producer_index = j;
      if (candidate_is_consistent(c, config.span_length_words)) round.candidates[j] = std::move(c);
    } catch (const std::exception&) {
      // absent candidate; its column stays INVALID
    }
  });
  round.timings.generate_ms = elapsed_ms(t0);

  bool any = false;
  for (const auto& c : round.candidates) any = any || c.has_value();
  if (!any) throw RoundError("every model failed to generate a span");

  t0 = Clock::now();
  std::vector<std::optional<double>> cells(n * n);
  parallel_for(n * n, workers, [&](std::size_t cell) {
    const std::size_t scorer = cell / n;
    const std::size_t span = cell % n;
    const auto& cand = round.candidates[span];
    if (!cand || cand->text.empty()) return;
    try {
      const auto scores = pool.at(scorer).score(prefix, cand->text);
      cells[cell] = compute_perplexity(std::span<const TokenScore>(scores));
    } catch (const std::exception&) {
      // single INVALID entry
    }
  });
  for (std::size_t cell = 0; cell < n * n; ++cell) {
    if (cells[cell]) round.matrix.set(cell / n, cell % n, *cells[cell]);
  }
  round.timings.score_ms = elapsed_ms(t0);

  t0 = Clock::now();
  for (std::size_t j = 0; j < n; ++j) {
    const auto column = round.matrix.column(j);
    if (column.empty()) {
      round.filters.push_back(FilterResult{j, {}, {}, false});
    } else if (config.filter_enabled) {
      round.filters.push_back(filter_scores(j, column, config.lambda));
    } else {
      round.filters.push_back(keep_all(j, column));
    }
  }
  try {
    const Selection s = select_span(round.matrix, round.filters, round.candidates);
    round.winner_index = s.winner_index;
    round.winner_mean_ppl = s.mean_ppl;
  } catch (const NoEligibleSpanError&) {
    for (const auto& c : round.candidates) {
      if (c && !c->text.empty()) throw RoundError("no non-empty candidate span could be scored");
    }
  }
  round.timings.select_ms = elapsed_ms(t0);
  return round;
}

Transcript generate(const EnsemblePool& pool, const std::string& prompt,
                    const EnsembleConfig& config) {
  config.validate();
  Transcript t;
  t.prompt = prompt;
  std::string prefix = prompt;
  std::size_t words = 0;

  while (true) {
    if (words >= config.max_total_words) {
      t.stop_reason = StopReason::word_budget;
      break;
    }

    RoundResult round;
    for (std::size_t attempt = 0;; ++attempt) {
      try {
        round = ensemble_round(pool, prefix, config);
        break;
      } catch (const RoundError&) {
        if (attempt >= config.max_retries) throw;
      }
    }

    t.rounds.push_back(std::move(round));
    const RoundResult& done = t.rounds.back();
    if (!done.winner_index) {
      t.stop_reason = StopReason::all_empty;
      break;
    }
    const SpanCandidate& win = *done.candidates[*done.winner_index];
    prefix += win.text;
    t.final_text += win.text;
    words += win.word_count;
    if (win.finished) {
      t.stop_reason = StopReason::eos;
      break;
    }
  }
  return t;
}

}  // namespace spanens
