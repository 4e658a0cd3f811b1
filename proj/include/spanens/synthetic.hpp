#pragma once

/**
 * Synthetic table-LM suites for exercising the ensemble without real models.
 *
 * Every example's prompt is a single vocabulary token "Q<i>:" and its answer
 * is one of eight answer words " a0" .. " a7", followed by end-of-sequence.
 * Good models put most of their mass on the gold word; bad models are
 * confidently wrong and score the gold word harshly.
 */

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "spanens/harness.hpp"
#include "spanens/pool.hpp"
#include "spanens/table_lm.hpp"

namespace spanens::synthetic {

struct Suite {
  std::vector<EvalExample> dataset;
  std::map<std::string, TableSpec> models;
  // scenario name -> member model names, in pool order
  std::vector<std::pair<std::string, std::vector<std::string>>> pools;

  EnsemblePool make_pool(const std::string& scenario) const;
  EnsemblePool make_pool(const std::vector<std::string>& members) const;
};

/// Pools "4-good", "3-good-1-bad" and "2-good-2-bad" over good models g0..g3
/// and bad models b0, b1.
Suite robustness_suite(std::size_t n_examples, std::uint64_t seed);

/// Four models m0..m3; model m knows example i when (i mod 10 - m) mod 10 < 4
/// and is near-uniform, slightly preferring a wrong word, elsewhere. Pool
/// "4-complementary" plus one single-model pool per member.
Suite complementary_suite(std::size_t n_examples, std::uint64_t seed);

/// Model whose greedy output after `prompt` is " w1 w2 ... wN" then EOS.
TableSpec chain_model(std::string name, const std::string& prompt, std::size_t n_words);

/// Writes <dir>/models/*.json, <dir>/pools/<scenario>.json and
/// <dir>/dataset.jsonl.
void write_suite(const Suite& suite, const std::filesystem::path& dir);

}  // namespace spanens::synthetic
