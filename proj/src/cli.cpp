#include "spanens/cli.hpp"

#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "spanens/ensemble.hpp"
#include "spanens/harness.hpp"
#include "spanens/pool.hpp"
#include "spanens/transcript.hpp"

namespace spanens::cli {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string one_line(std::string msg) {
  for (char& c : msg) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return msg;
}

struct EnsembleFlags {
  std::string pool;
  std::size_t span_length = 4;
  double lambda = 10.0;
  bool no_filter = false;
  std::size_t max_words = 256;
  std::size_t workers = 0;
  std::optional<int> timeout_ms;

  void add_to(CLI::App& cmd, bool pool_required) {
    auto* p = cmd.add_option("--pool", pool, "pool config (JSON list of backends)");
    if (pool_required) p->required();
    cmd.add_option("--span-length", span_length, "words per span")->capture_default_str();
    cmd.add_option("--lambda", lambda, "outlier ratio threshold")->capture_default_str();
    cmd.add_flag("--no-filter", no_filter, "keep every valid score");
    cmd.add_option("--max-words", max_words, "generated word budget")->capture_default_str();
    cmd.add_option("--timeout-ms", timeout_ms, "override HTTP backend timeouts");
  }

  EnsembleConfig config() const {
    EnsembleConfig c;
    c.span_length_words = span_length;
    c.lambda = lambda;
    c.filter_enabled = !no_filter;
    c.max_total_words = max_words;
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return c;
  }

  PoolLoadOptions pool_options() const {
    if (timeout_ms && *timeout_ms <= 0) throw UsageError("--timeout-ms must be positive");
    return PoolLoadOptions{timeout_ms};
  }
};

Metric metric_or_usage(const std::string& name) {
  const auto m = parse_metric(name);
  if (!m) throw UsageError("unknown metric '" + name + "' (expected em, numeric or bleu)");
  return *m;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

int cmd_run(const EnsembleFlags& flags, const std::string& prompt_arg, const std::string& prompt_file,
            const std::string& trace_path, std::ostream& out) {
  if (prompt_arg.empty() == prompt_file.empty()) throw UsageError("exactly one of --prompt or --prompt-file is required");
  EnsembleConfig cfg = flags.config();
  cfg.workers = flags.workers;

  std::string prompt = prompt_arg;
  if (!prompt_file.empty()) {
    std::ifstream in(prompt_file);
    if (!in) throw std::runtime_error("cannot open prompt file " + prompt_file);
    std::stringstream ss;
    ss << in.rdbuf();
    prompt = ss.str();
  }
  if (prompt.empty()) throw UsageError("prompt is empty");

  const EnsemblePool pool = load_pool(flags.pool, flags.pool_options());
  const Transcript t = generate(pool, prompt, cfg);
  if (!trace_path.empty()) {
    auto trace = open_output(trace_path);
    write_transcript_jsonl(trace, t);
  }
  out << t.final_text << '\n';
  return kExitOk;
}

int cmd_eval(const EnsembleFlags& flags, const std::string& dataset, const std::string& metric_name,
             const std::string& out_path, std::size_t workers, std::ostream& out) {
  const Metric metric = metric_or_usage(metric_name);
  const EnsembleConfig cfg = flags.config();
  const auto pool_options = flags.pool_options();

  const auto examples = load_dataset(dataset);
  const EnsemblePool pool = load_pool(flags.pool, pool_options);
  EvalOptions opts;
  opts.workers = workers;
  opts.pool_label = std::filesystem::path(flags.pool).stem().string();
  const EvalReport report = run_eval(examples, pool, cfg, metric, opts);

  if (!out_path.empty()) {
    auto f = open_output(out_path);
    f << report.to_json().dump(2) << '\n';
  }
  out << to_string(metric) << ' ' << report.aggregate << '\n';
  return kExitOk;
}

int cmd_sweep(const EnsembleFlags& flags, const std::string& spec_path, const std::string& dataset_flag,
              const std::string& metric_name, const std::string& out_path, std::size_t workers,
              std::ostream& out, std::ostream& err) {
  SweepSpec spec;
  try {
    spec = load_sweep_spec(spec_path);
  } catch (const SweepSpecError& e) {
    throw UsageError(e.what());
  }

  Metric metric = spec.metric.value_or(Metric::em);
  if (!metric_name.empty()) metric = metric_or_usage(metric_name);
  std::filesystem::path dataset = dataset_flag;
  if (dataset.empty()) {
    if (!spec.dataset) throw UsageError("no dataset: pass --dataset or set \"dataset\" in the spec");
    dataset = *spec.dataset;
  }
  EnsembleConfig base = flags.config();
  if (spec.pool_scenarios.empty() && flags.pool.empty()) {
    throw UsageError("no pool: pass --pool or set \"pool_scenarios\" in the spec");
  }

  const auto examples = load_dataset(dataset);
  std::vector<std::pair<std::string, EnsemblePool>> pools;
  if (spec.pool_scenarios.empty()) {
    pools.emplace_back(std::filesystem::path(flags.pool).stem().string(),
                       load_pool(flags.pool, flags.pool_options()));
  } else {
    for (const auto& [name, path] : spec.pool_scenarios) {
      pools.emplace_back(name, load_pool(path, flags.pool_options()));
    }
  }

  EvalOptions opts;
  opts.workers = workers;
  const auto cells = run_sweep(spec, examples, pools, base, metric, opts);

  std::size_t ok = 0;
  for (const auto& c : cells) {
    if (c.report) {
      ++ok;
    } else {
      err << "warning: cell span_length=" << c.span_length << " lambda=" << c.lambda
          << " filter=" << c.filter << " pool=" << c.pool << " failed: " << one_line(c.error) << '\n';
    }
  }
  if (out_path.empty()) {
    write_sweep_csv(out, cells, metric);
  } else {
    auto f = open_output(out_path);
    write_sweep_csv(f, cells, metric);
  }
  if (ok == 0) {
    err << "error: every sweep cell failed\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_validate_pool(const EnsembleFlags& flags, std::ostream& out) {
  const EnsemblePool pool = load_pool(flags.pool, flags.pool_options());
  out << "ok " << pool.size() << " models\n";
  for (std::size_t i = 0; i < pool.size(); ++i) out << i << ' ' << pool.at(i).name() << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Span-level ensemble decoding over a pool of language models", "spanens"};
  app.require_subcommand(1);

  EnsembleFlags run_flags;
  std::string prompt;
  std::string prompt_file;
  std::string trace;
  auto* run_cmd = app.add_subcommand("run", "ensemble-decode one prompt and print the result");
  run_flags.add_to(*run_cmd, true);
  auto* prompt_opt = run_cmd->add_option("--prompt", prompt, "prompt text");
  run_cmd->add_option("--prompt-file", prompt_file, "file holding the prompt")->excludes(prompt_opt);
  run_cmd->add_option("--trace", trace, "write the per-round transcript as JSONL");
  run_cmd->add_option("--workers", run_flags.workers, "concurrent backend calls (default: pool size)");

  EnsembleFlags eval_flags;
  std::string eval_dataset;
  std::string eval_metric;
  std::string eval_out;
  std::size_t eval_workers = 4;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate the ensemble on a JSONL dataset");
  eval_flags.add_to(*eval_cmd, true);
  eval_cmd->add_option("--dataset", eval_dataset, "JSONL dataset")->required();
  eval_cmd->add_option("--metric", eval_metric, "em | numeric | bleu")->required();
  eval_cmd->add_option("--out", eval_out, "write the JSON report here");
  eval_cmd->add_option("--workers", eval_workers, "concurrent examples")->capture_default_str();

  EnsembleFlags sweep_flags;
  std::string sweep_spec;
  std::string sweep_dataset;
  std::string sweep_metric;
  std::string sweep_out;
  std::size_t sweep_workers = 4;
  auto* sweep_cmd = app.add_subcommand("sweep", "evaluate a grid of settings and write a CSV summary");
  sweep_flags.add_to(*sweep_cmd, false);
  sweep_cmd->add_option("--spec", sweep_spec, "sweep spec JSON")->required();
  sweep_cmd->add_option("--dataset", sweep_dataset, "JSONL dataset (overrides the spec)");
  sweep_cmd->add_option("--metric", sweep_metric, "em | numeric | bleu (overrides the spec)");
  sweep_cmd->add_option("--out", sweep_out, "CSV output path (default: stdout)");
  sweep_cmd->add_option("--workers", sweep_workers, "concurrent examples")->capture_default_str();

  EnsembleFlags validate_flags;
  auto* validate_cmd = app.add_subcommand("validate-pool", "load a pool config and list its models");
  validate_cmd->add_option("--pool", validate_flags.pool, "pool config")->required();
  validate_cmd->add_option("--timeout-ms", validate_flags.timeout_ms, "override HTTP backend timeouts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << one_line(e.what()) << '\n';
    err << "usage: spanens {run|eval|sweep|validate-pool} [flags]; see --help\n";
    return kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run_flags, prompt, prompt_file, trace, out);
    if (*eval_cmd) return cmd_eval(eval_flags, eval_dataset, eval_metric, eval_out, eval_workers, out);
    if (*sweep_cmd) {
      return cmd_sweep(sweep_flags, sweep_spec, sweep_dataset, sweep_metric, sweep_out, sweep_workers, out, err);
    }
    if (*validate_cmd) return cmd_validate_pool(validate_flags, out);
  } catch (const UsageError& e) {
    err << "error: " << one_line(e.what()) << '\n';
    err << "usage: spanens {run|eval|sweep|validate-pool} [flags]; see --help\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << one_line(e.what()) << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace spanens::cli
