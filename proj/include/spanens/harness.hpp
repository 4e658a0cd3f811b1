#pragma once

/**
 * Evaluation harness: runs the ensemble over a JSONL dataset and scores the
 * predictions, and sweeps span length, lambda, filter switch and pool
 * composition over a Cartesian grid.
 *
 * Dataset line: {"id", "prompt", "references": [...], "task_kind"}
 * with task_kind one of exact_match | numeric | translation.
 */

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "spanens/ensemble.hpp"
#include "spanens/pool.hpp"

namespace spanens {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SweepSpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Metric { em, numeric, bleu };

std::optional<Metric> parse_metric(std::string_view name);
const char* to_string(Metric metric);

struct EvalExample {
  std::string id;
  std::string prompt;
  std::vector<std::string> references;
  std::string task_kind = "exact_match";
};

/// Throws DatasetError naming the 1-based line of the first bad record.
std::vector<EvalExample> load_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, const std::vector<EvalExample>& examples);

struct ExampleRecord {
  std::string id;
  std::string prediction;
  double score = 0.0;  // 0..100
  bool failed = false;
  std::string error;
  std::string stop_reason;
  std::size_t rounds = 0;
  std::size_t words = 0;
  double generate_ms = 0.0;
  double extra_ms = 0.0;  // scoring + selection, i.e. beyond plain decoding
};

struct TimingStats {
  std::size_t total_rounds = 0;
  std::size_t total_words = 0;
  double mean_rounds = 0.0;
  double mean_extra_ms_per_word = 0.0;
  double mean_generate_ms_per_word = 0.0;
  double wall_ms = 0.0;
};

struct EvalReport {
  EnsembleConfig config;
  Metric metric = Metric::em;
  std::string pool;
  std::size_t n_models = 0;
  std::vector<ExampleRecord> examples;  // sorted by id
  double aggregate = 0.0;               // 0..100
  std::size_t failures = 0;
  TimingStats timing;

  /// Timing-dependent fields are only written when `with_timing` is set, so
  /// two reports of identical runs compare equal without them.
  nlohmann::json to_json(bool with_timing = true) const;
};

struct EvalOptions {
  std::size_t workers = 4;  // concurrent examples
  std::string pool_label;
};

EvalReport run_eval(const std::vector<EvalExample>& examples, const EnsemblePool& pool,
                    const EnsembleConfig& config, Metric metric, const EvalOptions& options = {});

EvalReport run_eval(const std::filesystem::path& dataset_path, const std::filesystem::path& pool_config,
                    const EnsembleConfig& config, Metric metric, const EvalOptions& options = {});

struct SweepSpec {
  std::vector<std::size_t> span_lengths{1, 2, 4, 8, 16, 32};
  std::vector<double> lambdas{10.0};
  std::vector<bool> filters{true};
  // name -> pool config path; empty means the caller's base pool
  std::vector<std::pair<std::string, std::filesystem::path>> pool_scenarios;
  std::optional<std::filesystem::path> dataset;
  std::optional<Metric> metric;
  std::optional<std::size_t> max_words;

  void validate() const;
  std::size_t cell_count() const;
};

/// Missing keys take defaults; an empty object or an explicitly empty list
/// is rejected with SweepSpecError. Relative paths resolve against the spec.
SweepSpec parse_sweep_spec(const nlohmann::ordered_json& j, const std::filesystem::path& base_dir = {});
SweepSpec load_sweep_spec(const std::filesystem::path& path);

struct SweepCell {
  std::size_t span_length = 0;
  double lambda = 0.0;
  bool filter = true;
  std::string pool;
  std::optional<EvalReport> report;
  std::string error;
};

/// One run_eval per grid cell, ordered pool > filter > lambda > span length.
/// A failing cell records its error and the sweep moves on.
std::vector<SweepCell> run_sweep(const SweepSpec& spec, const std::vector<EvalExample>& examples,
                                 const std::vector<std::pair<std::string, EnsemblePool>>& pools,
                                 const EnsembleConfig& base, Metric metric, const EvalOptions& options = {});

/// Columns: span_length,lambda,filter,pool,metric,value,mean_ms_per_word.
/// Failed cells are skipped.
void write_sweep_csv(std::ostream& out, const std::vector<SweepCell>& cells, Metric metric);

}  // namespace spanens
