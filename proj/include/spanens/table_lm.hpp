#pragma once

/**
 * Deterministic n-gram language model defined by explicit probability tables.
 *
 * Text is tokenized by longest match against the vocabulary (the EOS token
 * never matches text). The next-token distribution is looked up by the last
 * `order` tokens joined with U+001F; contexts missing from the table fall
 * back to a uniform distribution over the vocabulary. Greedy decoding picks
 * the most probable token, lowest vocabulary index on ties.
 *
 * File format:
 *   {"order": k, "vocab": [...], "eos": "</s>",
 *    "transitions": {"ctx-key": {"token": prob, ...}, ...},
 *    "fallback": "uniform"}
 */

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "spanens/backend.hpp"

namespace spanens {

class TableLMError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kContextSeparator = '\x1f';

struct TableSpec {
  std::string name = "table";
  std::size_t order = 1;
  std::vector<std::string> vocab;
  std::string eos = "</s>";
  // context key -> token -> probability
  std::map<std::string, std::map<std::string, double>> transitions;
  std::size_t max_tokens_per_span = 4096;
};

/// Joins context tokens with the separator used for transition keys.
std::string context_key(const std::vector<std::string>& tokens);

class TableLM final : public Backend {
 public:
  /// Validates the spec; throws TableLMError on a malformed table.
  explicit TableLM(TableSpec spec);

  static TableLM from_json(const nlohmann::json& j, std::string name = "table");
  static TableLM load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  const std::string& name() const override { return spec_.name; }
  bool supports_scoring() const override { return true; }
  SpanCandidate generate_span(std::string_view prefix, std::size_t span_words) const override;
  std::vector<TokenScore> score(std::string_view prefix,
                                std::string_view continuation) const override;

  /// Longest-match tokenization. Uncovered code points become single tokens
  /// unless `strict`, in which case they throw BackendError.
  std::vector<std::string> tokenize(std::string_view text, bool strict = false) const;

  /// Probability of `token` after the given token history (0 if unlisted).
  double probability(const std::vector<std::string>& history, const std::string& token) const;

  const TableSpec& spec() const { return spec_; }

 private:
  struct Entry {
    std::size_t token;
    double prob;
  };
  using Distribution = std::vector<Entry>;  // sorted by token index

  const Distribution* lookup(const std::vector<std::string>& history) const;
  std::size_t greedy_next(const std::vector<std::string>& history) const;
  double prob_of(const std::vector<std::string>& history, std::size_t token) const;

  TableSpec spec_;
  std::unordered_map<std::string, std::size_t> index_;
  std::unordered_map<std::string, Distribution> table_;
  std::size_t eos_index_ = 0;
  std::size_t max_token_bytes_ = 0;
};

}  // namespace spanens
